from typing import NewType

# epochs, sites and observations are all plain numbers or strings underneath
# to keep signatures readable we give each of them its own type
Epoch = NewType(name="Epoch", tp=float)

SiteId = NewType(name="SiteId", tp=str)

ObservationIndex = NewType(name="ObservationIndex", tp=int)

__all__ = [
    "Epoch",
    "SiteId",
    "ObservationIndex",
]
