"""Early-warning indicators for boundary-noise-driven dissipative systems.

Subpackages and modules:

* ``spectral``    -- closed-form stationary covariance pairings on spectral slots
* ``heat1d``      -- 1-D diffusion with noisy flux/value boundary data (exact modes)
* ``estimators``  -- time-series and ensemble statistics used by the experiments
* ``eigensolver`` -- dense spectral analysis of discretized drift operators
* ``boussinesq``  -- stretched-grid double-diffusive cavity model and its solvers
* ``cli``         -- experiment runner emitting CSV tables and run manifests
"""

__version__ = "0.1.0"
