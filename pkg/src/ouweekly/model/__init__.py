from .params import *
from .quadrature import *
from .distribution import *
