from .app import AdapterConfig, create_app
from .engine import CheckpointEngine, StubEngine

__version__ = "0.1.0"
__all__ = ["AdapterConfig", "CheckpointEngine", "StubEngine", "create_app", "__version__"]
