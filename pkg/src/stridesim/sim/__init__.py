from .model import FieldError, Model, compile_model
from .physics import StepPipeline, fk_batch, forward_kinematics, physics_step
from .spec import JointSpec, ModelSpec, SpecError, load_model_spec, save_model_spec
from .state import BatchState, StateFrame, detect_nonfinite, restore, snapshot

__all__ = [
    "BatchState",
    "FieldError",
    "JointSpec",
    "Model",
    "ModelSpec",
    "SpecError",
    "StateFrame",
    "StepPipeline",
    "compile_model",
    "detect_nonfinite",
    "fk_batch",
    "forward_kinematics",
    "load_model_spec",
    "physics_step",
    "restore",
    "save_model_spec",
    "snapshot",
]
