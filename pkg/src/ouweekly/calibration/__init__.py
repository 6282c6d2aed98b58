from .mle import *
from .schemes import *
from .series import *
