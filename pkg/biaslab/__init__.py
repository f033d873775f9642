# biaslab
# Bias amplification and selection-bias lab for linear and nonlinear
# structural causal models.

__version__ = "0.1.0"
