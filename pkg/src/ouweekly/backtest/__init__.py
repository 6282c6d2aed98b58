from .engine import *
from .gating import *
from .optimize import *
from .reports import *
