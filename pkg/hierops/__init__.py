from .constants import *
from .hierops import *

__version__ = "0.1.0"
