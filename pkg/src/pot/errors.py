class PotError(Exception):
    """Base class for planner and oracle failures."""


class SimulationFailed(PotError):
    """A single simulation could not complete; the search skips it."""


class InvalidThought(PotError):
    """An oracle proposed a step that is unparseable or arithmetically illegal."""


class OracleExhausted(SimulationFailed):
    """No valid thought after the configured number of attempts."""


class MalformedOracleResponse(PotError):
    """An LM response lacks the tokens needed to form a judgment."""


class TransportError(PotError):
    """HTTP failure after all retries."""
