"""Word Mover's Distance and random-feature document embeddings.

Subpackages follow the pipeline: `embeddings` loads pre-trained word
vectors, `corpus` turns labeled text into weighted documents, `transport`
computes exact Word Mover's Distances, `wme` builds the random-feature
document embeddings, `learn` evaluates them, and `cli` wires everything
into a command line.
"""

__version__ = "0.1.0"
