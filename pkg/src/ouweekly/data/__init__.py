from .sessions import *
from .ingest import *
