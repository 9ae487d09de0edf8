"""Perioperation toolkit: passive-hand linkage kinematics, contact torque
recovery, tactile frame processing, synchronized session recording, and
training-episode export."""

from .contact_torque import ContactWrench, TorqueEstimate, joint_torques, observability
from .container import ContainerReader, ContainerWriter
from .errors import PeriopError
from .export import AugmentConfig, Episode, augment, export_episode
from .hand_model import (
    Contact,
    HandModel,
    JointState,
    Pose,
    contact_jacobian,
    forward_kinematics,
    load_model,
    validate_state,
    workspace_report,
)
from .linkage import (
    FourBarGeometry,
    LinkageModel,
    exo_to_hand,
    grashof_check,
    mechanical_advantage,
    solve_fourbar,
)
from .metrics import (
    Manifest,
    Trial,
    mix_manifest,
    normalized_success,
    stage_time_stats,
    throughput,
)
from .session import AlignedStep, align, record
from .tactile import DeltaImage, SuperImage, TactileFrame, contact_summary, delta, super_image, synth_press
from .wire import EncoderFrame, EncoderSpec, count_to_radians, parse_encoder_frames, radians_to_count

__version__ = "0.1.0"
