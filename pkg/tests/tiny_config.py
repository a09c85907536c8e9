"""A run configuration small enough for end-to-end CLI runs in seconds."""

SHORT = [1000, 2000]
MIX = {"clean": 2, "accent": 1, "confusable": 1}

TINY = {
    "preset": "desk",
    "corpus": {"splits": {
        "train_acoustic": {"n_per_language": 6, "seed": 1, "duration_ms": SHORT},
        "train_text": {"n_per_language": 6, "seed": 2, "duration_ms": SHORT},
        "train_fusion": {"n_per_language": 6, "subsets": MIX, "seed": 3, "duration_ms": SHORT},
        "test": {"n_per_language": 5, "subsets": MIX, "seed": 4, "duration_ms": SHORT},
        "ssl_unlabeled": {"n_per_language": 4, "subsets": {"accent": 1}, "seed": 5,
                          "duration_ms": SHORT, "unlabeled": True},
        "ssl_heldout": {"n_per_language": 3, "subsets": {"accent": 1}, "seed": 6,
                        "duration_ms": SHORT},
    }},
    "acoustic": {"hidden": [8], "chunk_epochs": 1, "full_epochs": 1, "chunks_per_utterance": 2},
    "text": {"embed_dim": 6, "hidden_dim": 6, "fc_dim": 4, "epochs": 1},
    "fusion": {"hidden": [8], "epochs": 2},
    "ssl": {"threshold": 0.5},
}
