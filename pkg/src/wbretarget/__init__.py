"""Whole-body retargeting toolkit.

Converts dual-arm end-effector episodes into whole-body humanoid action
datasets: closed-loop IK arms, a DAgger-trained base-command manager running
in a kinematic simulator, and a flow-matching action head trained on the
retargeted triplets.
"""

__version__ = "0.1.0"
