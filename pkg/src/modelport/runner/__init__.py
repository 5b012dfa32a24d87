from .instance import InstanceConfig, ModelInstance, materialize, materialize_dir, spawn
from .recipe import emit_container_recipe
from .builtins import BUILTINS, builtin_bundle, parse_entry

__all__ = [
    "InstanceConfig",
    "ModelInstance",
    "materialize",
    "materialize_dir",
    "spawn",
    "emit_container_recipe",
    "BUILTINS",
    "builtin_bundle",
    "parse_entry",
]
