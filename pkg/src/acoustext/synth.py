"""Synthetic bilingual corpora with controllable confusers.

Each language is a :class:`SyntheticLanguageProfile`.  Acoustics are a
Markov chain over a phone inventory shared by both languages; every phone
segment is rendered as ``phone_mean + language_offset + noise``.  The two
languages differ by their offset (a small direction the classifier must
integrate over time) and, optionally, by their transition matrices.

Confusers mirror the failure modes an acoustic-only or text-only classifier
hits on real traffic:

* ``accent_shift = a`` renders phones with ``(1-a)`` of the speaker's own
  offset and ``a`` of the other language's, plus ``a * accent_trace``, a
  faint native-language residue that lets a retrained model learn the
  accented distribution.  Text stays in the gold language.
* ``confusability = c``: the wrong-language decoder outputs the clean
  counterpart word of its own lexicon with probability ``c`` ("alexa my
  notification" for "alexa me notifica aquí"), otherwise a garbled string.
* ``misrecognition = m``: each gold word is misrecognised (garbled) with
  probability ``m``, so the correct decoder's output can look less fluent
  than the wrong one's.
* ``identical_hypotheses``: both decoders emit the gold string verbatim.
* ``code_switch_probability``: segments and words borrowed from the other
  language.

Frames are mean/variance-normalised LFBE-like vectors, not the output of
:func:`acoustext.features.compute_lfbe`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .features import FeatureSequence, n_frames_for
from .manifest import Timeline, Utterance
from .nn import derive_rng, make_rng

DEFAULT_LANGUAGES = ("en-US", "es-US")

# Per-language orthography.  Words are CV syllables, so garbled strings
# (uniform characters) are detectable from consonant/vowel clusters.
_ALPHABETS = [
    ("bdgklmnprst", "aeiou"),
    ("bcdfjlmnpqrstvz", "aeioáéíóú"),
]
# Devanagari consonants and vowel signs for the Hindi analog.
_DEVANAGARI = ("कखगचजटडतदनपबमयरलवसह", "\u093e\u093f\u0940\u0941\u0942\u0947\u0948\u094b")


def _alphabet_for(language: str, index: int) -> Tuple[str, str]:
    if language.split("-")[0] == "hi":
        return _DEVANAGARI
    return _ALPHABETS[index]


@dataclass(eq=False)
class SyntheticLanguageProfile:
    language: str
    phone_means: np.ndarray       # (K, dim), shared inventory
    language_offset: np.ndarray   # (dim,)
    accent_trace: np.ndarray      # (dim,)
    transitions: np.ndarray       # (K, K), rows sum to 1
    consonants: str
    vowels: str
    lexicon: Tuple[str, ...]
    noise_std: float = 1.0
    segment_frames: Tuple[int, int] = (5, 15)
    words_per_second: float = 1.5
    decoder_latency_ms: int = 150
    accent_shift: float = 0.0
    code_switch_probability: float = 0.0

    def __post_init__(self):
        if not self.consonants or not self.vowels:
            raise ValueError("alphabet must be nonempty")
        rows = self.transitions.sum(axis=1)
        if not np.allclose(rows, 1.0):
            raise ValueError("transition rows must sum to 1")
        for name in ("accent_shift", "code_switch_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def alphabet(self) -> str:
        return self.consonants + self.vowels

    @property
    def dim(self) -> int:
        return self.phone_means.shape[1]


def _orthonormal(rng, dim: int, k: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(dim, k)))
    return q.T


def _lexicon(rng, consonants: str, vowels: str, size: int) -> Tuple[str, ...]:
    words = set()
    while len(words) < size:
        n_syl = int(rng.integers(1, 4))
        w = "".join(consonants[rng.integers(len(consonants))] + vowels[rng.integers(len(vowels))]
                    for _ in range(n_syl))
        words.add(w)
    return tuple(sorted(words))


def _transitions(rng, k: int, fanout: int = 3) -> np.ndarray:
    T = np.full((k, k), 0.02)
    for i in range(k):
        T[i, rng.choice(k, fanout, replace=False)] += rng.dirichlet(np.ones(fanout)) * 3
    return T / T.sum(axis=1, keepdims=True)


def _blend(shared: np.ndarray, own: np.ndarray, w: float) -> np.ndarray:
    T = (1 - w) * shared + w * own
    return T / T.sum(axis=1, keepdims=True)


def make_language_pair(languages: Sequence[str] = DEFAULT_LANGUAGES, seed: int = 0,
                       dim: int = 64, n_phones: int = 16, separation: float = 0.2,
                       trace: float = 0.3, noise_std: float = 1.0,
                       transition_divergence: float = 0.0,
                       lexicon_size: int = 50, **profile_kw) -> Tuple[SyntheticLanguageProfile, ...]:
    """Two profiles sharing a phone inventory.

    ``separation`` is the norm of each language offset (they point in
    opposite directions); ``trace`` the norm of the accent residue;
    ``transition_divergence`` in [0, 1] blends a shared phone chain with a
    language-specific one (0 keeps phonotactics identical).
    """
    if len(languages) != 2:
        raise ValueError("synthetic corpora are bilingual")
    rng = make_rng(seed)
    basis = _orthonormal(rng, dim, 2)
    u, v = basis[0], basis[1]
    phones = rng.normal(size=(n_phones, dim))
    phones -= np.outer(phones @ u, u) + np.outer(phones @ v, v)
    shared = _transitions(rng, n_phones)
    out = []
    for li, lang in enumerate(languages):
        sign = 1.0 if li == 0 else -1.0
        cons, vow = _alphabet_for(lang, li)
        out.append(SyntheticLanguageProfile(
            language=lang, phone_means=phones, language_offset=sign * separation * u,
            accent_trace=sign * trace * v,
            transitions=_blend(shared, _transitions(rng, n_phones), transition_divergence),
            consonants=cons, vowels=vow, lexicon=_lexicon(rng, cons, vow, lexicon_size),
            noise_std=noise_std, **profile_kw))
    return tuple(out)


def _garble(rng, alphabet: str, n: int) -> str:
    return "".join(alphabet[i] for i in rng.integers(len(alphabet), size=n))


def synth_utterance(profile: SyntheticLanguageProfile, duration_ms: int, rng: np.random.Generator,
                    *, other: SyntheticLanguageProfile, confusability: float = 0.0,
                    misrecognition: float = 0.0, identical_hypotheses: bool = False,
                    hop_ms: float = 10.0, window_ms: float = 25.0):
    """Generate ``(FeatureSequence, gold label, {language: timeline})``.

    The gold decoder emits the spoken words; the other decoder emits its
    rendering of the same content (see module docstring).
    """
    n = n_frames_for(duration_ms, window_ms, hop_ms)
    if n < 3:
        raise ValueError(f"duration {duration_ms} ms is shorter than three hops")
    a = profile.accent_shift
    p_cs = profile.code_switch_probability
    K = profile.phone_means.shape[0]

    frames = np.empty((n, profile.dim))
    pos = 0
    phone = int(rng.integers(K))
    lo, hi = profile.segment_frames
    while pos < n:
        seg = int(rng.integers(lo, hi + 1))
        src, alt = (other, profile) if (p_cs and rng.random() < p_cs) else (profile, other)
        mean = (profile.phone_means[phone] + (1 - a) * src.language_offset
                + a * alt.language_offset + a * src.accent_trace)
        m = min(seg, n - pos)
        frames[pos:pos + m] = mean + src.noise_std * rng.normal(size=(m, profile.dim))
        pos += m
        phone = int(rng.choice(K, p=src.transitions[phone]))

    n_words = max(1, int(round(duration_ms / 1000.0 * profile.words_per_second)))
    gold_words, other_words = [], []
    for _ in range(n_words):
        idx = int(rng.integers(len(profile.lexicon)))
        if p_cs and rng.random() < p_cs:
            w = other.lexicon[idx]
            gold_words.append(w)
            other_words.append(w)
            continue
        if misrecognition and rng.random() < misrecognition:
            gold_words.append(_garble(rng, profile.alphabet, len(profile.lexicon[idx])))
        else:
            gold_words.append(profile.lexicon[idx])
        if identical_hypotheses:
            other_words.append(profile.lexicon[idx])
        elif rng.random() < confusability:
            other_words.append(other.lexicon[idx])
        else:
            other_words.append(_garble(rng, other.alphabet, len(other.lexicon[idx])))

    times = []
    prev = 0
    for j in range(n_words):
        end = int(round(duration_ms * (j + 1) / n_words))
        t = duration_ms if j == n_words - 1 else min(duration_ms - 1, end + profile.decoder_latency_ms)
        t = max(t, prev + 1)
        times.append(t)
        prev = t
    timelines = {
        profile.language: [(t, " ".join(gold_words[:j + 1])) for j, t in enumerate(times)],
        other.language: [(t, " ".join(other_words[:j + 1])) for j, t in enumerate(times)],
    }
    feats = FeatureSequence(frames.astype(np.float32), hop_ms, window_ms, int(duration_ms))
    return feats, profile.language, timelines


SUBSETS = ("clean", "accent", "confusable", "identical", "codeswitch")


@dataclass
class CorpusSpec:
    n_per_language: int
    duration_ms: Tuple[int, int] = (4000, 8000)
    subsets: Dict[str, float] = field(default_factory=lambda: {"clean": 1.0})
    accent_range: Tuple[float, float] = (0.3, 1.0)
    code_switch_probability: float = 0.3
    misrecognition_range: Tuple[float, float] = (0.0, 0.0)

    def counts(self) -> Dict[str, int]:
        total = sum(self.subsets.values())
        names = list(self.subsets)
        out = {k: int(np.floor(self.n_per_language * self.subsets[k] / total)) for k in names}
        out[names[0]] += self.n_per_language - sum(out.values())
        return out


def synth_corpus(pair: Sequence[SyntheticLanguageProfile], spec: CorpusSpec, seed: int,
                 prefix: str = "utt") -> List[Utterance]:
    """Build a labeled corpus with per-utterance RNG streams ``(seed, id)``."""
    for name in spec.subsets:
        if name not in SUBSETS:
            raise ValueError(f"unknown subset {name!r}; expected one of {SUBSETS}")
    out = []
    counts = spec.counts()
    for li, prof in enumerate(pair):
        other = pair[1 - li]
        j = 0
        for subset, count in counts.items():
            for _ in range(count):
                uid = f"{prefix}-{prof.language}-{j:06d}"
                j += 1
                rng = derive_rng(seed, uid)
                dur = int(rng.integers(spec.duration_ms[0], spec.duration_ms[1] + 1))
                kw = {}
                p = prof
                if subset == "accent":
                    p = replace(prof, accent_shift=float(rng.uniform(*spec.accent_range)))
                elif subset == "confusable":
                    kw["confusability"] = 1.0
                    lo, hi = spec.misrecognition_range
                    if hi > 0:
                        kw["misrecognition"] = float(rng.uniform(lo, hi))
                elif subset == "identical":
                    kw["identical_hypotheses"] = True
                elif subset == "codeswitch":
                    p = replace(prof, code_switch_probability=spec.code_switch_probability)
                feats, gold, tls = synth_utterance(p, dur, rng, other=other, **kw)
                out.append(Utterance(uid, gold, dur, tls, subset=subset, frames=feats.frames))
    return out
