from .operations import *
from .settings import *
from .validation import *
