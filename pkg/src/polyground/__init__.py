"""Ground states of (-Delta)^m u = g(u) on R^N under the radial ansatz, and checks
of the Pohozaev identity and the polyharmonic log-Sobolev inequality."""

__version__ = "0.1.0"
