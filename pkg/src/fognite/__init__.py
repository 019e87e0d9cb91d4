"""fognite: a deterministic desk-scale simulator of a fog-cloud smart-grid
control loop.

Fog nodes run a hand-written CNN-LSTM load forecaster trained by federated
averaging with compressed weight exchange, a PPO agent schedules tasks onto
the nodes, a digital twin pre-executes each placement under perturbation
before it is allowed to run, and a discrete-event engine drives the whole
loop against a static least-cost baseline for comparison.
"""

__version__ = "0.1.0"
