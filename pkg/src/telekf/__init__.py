"""Toolkit for identifying teleoperator dynamics from trajectory data and
estimating slave-side positions through an impaired network channel.

Submodules:
    dataio    -- dataset loading, min-max normalization, block Hankel matrices
    sysid     -- MOESP subspace identification of discrete-time state space models
    netsim    -- delay / jitter / packet-loss channel simulation
    estimator -- Kalman filtering with empirical noise covariance bootstrap
    metrics   -- RMSE, accuracy, innovation whiteness, validation fit reports
    pipeline  -- experiment configuration and end-to-end commands
    cli       -- command-line front end
"""

__version__ = "0.1.0"
