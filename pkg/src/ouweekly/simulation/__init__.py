from .paths import *
from .montecarlo import *
from .synthetic import *
