"""Reference model-backend server for the segmentation/inpaint protocol."""
from .app import create_app
from .config import ServerConfig

__version__ = "0.1.0"
__all__ = ["create_app", "ServerConfig", "__version__"]
