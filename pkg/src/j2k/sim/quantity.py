"""Kubernetes resource quantity parsing (storage sizes only)."""

import re
from decimal import Decimal

_SUFFIXES = {
    "": 1,
    "k": 10**3, "M": 10**6, "G": 10**9, "T": 10**12, "P": 10**15, "E": 10**18,
    "Ki": 2**10, "Mi": 2**20, "Gi": 2**30, "Ti": 2**40, "Pi": 2**50, "Ei": 2**60,
}
_QUANTITY_RE = re.compile(r"^([0-9]+(?:\.[0-9]+)?)(Ki|Mi|Gi|Ti|Pi|Ei|k|M|G|T|P|E|)$")


def parse_quantity(value) -> int:
    """Bytes in a quantity such as ``5Gi`` or ``500M``."""
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    m = _QUANTITY_RE.match(str(value).strip())
    if m is None:
        raise ValueError(f"unsupported quantity {value!r}")
    number, suffix = m.groups()
    return int(Decimal(number) * _SUFFIXES[suffix])
