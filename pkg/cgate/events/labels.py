from .types import GenerationRecord, Label, Outcome


def label_of(record: GenerationRecord) -> Label:
    """Positive iff the generation was shown and accepted; everything else is negative."""
    if record.outcome is Outcome.ACCEPTED:
        return Label.POSITIVE
    return Label.NEGATIVE


def is_positive(record: GenerationRecord) -> bool:
    return label_of(record) is Label.POSITIVE
