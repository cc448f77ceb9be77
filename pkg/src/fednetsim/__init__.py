"""fednetsim: federated learning rounds co-simulated over a flow-level network."""

__version__ = "0.1.0"
