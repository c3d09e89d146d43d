from .backends import MockBackends
from .scenes import SceneManifest, SceneObject, SceneRegistry, render_scene

__all__ = [
    "MockBackends",
    "SceneManifest",
    "SceneObject",
    "SceneRegistry",
    "render_scene",
]
