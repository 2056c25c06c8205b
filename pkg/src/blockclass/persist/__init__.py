from blockclass.persist.eventlog import CorruptLogLine, EventLog, HashMismatch, read_records

__all__ = ["CorruptLogLine", "EventLog", "HashMismatch", "read_records"]
