"""fluidlab: a reaction-diffusion field substrate for world-model experiments.

The package couples a small reverse-mode autodiff engine over numpy arrays
with a PDE integration core (dilated diffusion + learned reaction + memory
fields), biologically inspired activity mechanisms, a persistent belief
field, a patch codec, a training loop, and a set of dynamical-systems
analyses, all driven by the ``fluidlab`` CLI.
"""

__version__ = "0.1.0"
