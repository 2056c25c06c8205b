"""blockclass: a classroom management service for block-based programming.

Subpackages:
    domain    -- courses, rosters, assignments, submissions
    projects  -- project XML parsing, block metrics, snapshot history
    presence  -- live student telemetry, hand-raise queue, idle alerts
    grading   -- rubric lifecycle and grade records
    chat      -- retrieval-grounded assistant, summaries, moderation
    llm       -- model provider gateway (remote HTTP or deterministic stub)
    api       -- HTTP + WebSocket facade
    sim       -- deterministic virtual-classroom simulator
"""

__version__ = "0.1.0"
