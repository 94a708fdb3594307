"""Stochastic lattice systems with Markovian switching: simulation and
statistical verification of dissipativity, contraction, tail, stability,
periodicity and small-noise limits on a finite lattice truncation."""

__version__ = "0.1.0"
