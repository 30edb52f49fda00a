"""otterlink: a self-contained Otter USV backseat-driver stack.

Custom-NMEA codec and UDP transport, a simulated onboard computer with
3-DOF catamaran dynamics and built-in control modes, a topic-based
client gateway, an NMPC path follower with an LOS + cascaded PI/PD
baseline, and record/replay + benchmark tooling.
"""

__version__ = "0.1.0"
