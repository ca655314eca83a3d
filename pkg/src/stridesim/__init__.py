"""stridesim: batched planar legged-robot RL environments.

N independent worlds are stepped in lockstep by a vectorized planar physics
backend; the MDP around them is composed from named observation, reward,
event, termination, command and curriculum terms owned by managers.
"""

__version__ = "0.1.0"
