"""Question-driven interactive retrieval engine.

Narrows a text corpus to the item a user is looking for by repeatedly
clustering the remaining corpus, picking a questionable entity from the
cluster relationship matrix, generating a natural-language question for it,
and eliminating corpus regions based on the typed answer.
"""

__version__ = "0.1.0"
