# flake8: noqa

# Define those first, so we can import them during library initialization
__author__ = "DevilXD"
__version__ = "0.1.0"


from .enums import *
from .mixins import *
from .exceptions import *
from .video_io import *
from .mog2 import *
from .blob import *
from .tracker import *
from .counter import *
from .evaluation import *
from .synth import *
from .config import *
from .pipeline import *
from .utils import StageTimer
