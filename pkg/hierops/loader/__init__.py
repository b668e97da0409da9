from .core import load_file
from .input_type import InputType
from .run_config import RunConfigLoader
