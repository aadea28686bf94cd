"""Lexicon-based sentiment scoring.

Two scorers share one lexicon format:

* :func:`score_vader` - valence lookup plus the VADER heuristics (boosters,
  negation, capitalisation, punctuation, contrastive "but", idioms) and the
  ``s / sqrt(s^2 + 15)`` normalisation;
* :func:`score_additive` - AFINN-style plain valence sum.

Rule constants are those of the reference VADER release (3.3.2).
"""

from __future__ import annotations

import enum
import logging
import math
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, DuplicateError, RowError

log = logging.getLogger(__name__)

B_INCR = 0.293
B_DECR = -0.293
C_INCR = 0.733
N_SCALAR = -0.74
EP_INCR = 0.292
EP_MAX = 4
QM_INCR = 0.18
QM_MAX_AMP = 0.96
BUT_BEFORE = 0.5
BUT_AFTER = 1.5
ALPHA = 15.0

NEGATE = frozenset("""
aint arent cannot cant couldnt darent didnt doesnt ain't aren't can't couldn't
daren't didn't doesn't dont hadnt hasnt havent isnt mightnt mustnt neither
don't hadn't hasn't haven't isn't mightn't mustn't neednt needn't never none
nope nor not nothing nowhere oughtnt shant shouldnt uhuh wasnt werent oughtn't
shan't shouldn't uh-uh wasn't weren't without wont wouldnt won't wouldn't
rarely seldom despite""".split())

_UP = """absolutely amazingly awfully completely considerable considerably
decidedly deeply effing enormous enormously entirely especially exceptional
exceptionally extreme extremely fabulously flipping flippin frackin fracking
fricking frickin frigging friggin fully fuckin fucking fuggin fugging greatly
hella highly hugely incredible incredibly intensely major majorly more most
particularly purely quite really remarkably so substantially thoroughly total
totally tremendous tremendously uber unbelievably unusually utter utterly
very""".split()
_DOWN = """almost barely hardly kinda kindof kind-of less little marginal
marginally occasional occasionally partly scarce scarcely slight slightly
somewhat sorta sortof sort-of""".split()
BOOSTERS = {**{w: B_INCR for w in _UP}, **{w: B_DECR for w in _DOWN},
            "just enough": B_DECR, "kind of": B_DECR, "sort of": B_DECR}

SPECIAL_CASES = {"the shit": 3.0, "the bomb": 3.0, "bad ass": 1.5, "badass": 1.5,
                 "bus stop": 0.0, "yeah right": -2.0, "kiss of death": -1.5,
                 "to die for": 3.0, "beating heart": 3.5}

_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION = re.compile(r"@\w+")


class SentimentLabel(enum.Enum):
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"

    @property
    def rank(self):
        return {"negative": 0, "neutral": 1, "positive": 2}[self.value]

    def __lt__(self, other):
        return self.rank < other.rank

    @classmethod
    def parse(cls, text):
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"unknown sentiment label {text!r}") from None


@dataclass(frozen=True)
class Lexicon:
    """Token -> valence table.

    ``entries`` keeps every line of the source file in order; lookups go
    through ``valence`` where a repeated token resolves to its last line.
    Keys containing spaces are multi-word phrases.
    """

    name: str
    entries: tuple
    valence: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self.valence:
            object.__setattr__(self, "valence", dict(self.entries))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, token):
        return token in self.valence

    def get(self, token, default=None):
        return self.valence.get(token, default)

    @property
    def phrases(self):
        return {k: v for k, v in self.valence.items() if " " in k}


def load_lexicon(path, name=None, duplicates="error") -> Lexicon:
    """Read a ``token<TAB>valence[<TAB>...]`` file (VADER or AFINN layout).

    ``duplicates`` is ``"error"`` (raise on a repeated token) or ``"last"``
    (keep every line, later lines win on lookup).
    """
    if duplicates not in ("error", "last"):
        raise ConfigError(f"duplicates must be 'error' or 'last', not {duplicates!r}")
    path = Path(path)
    entries = []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2 or not parts[0]:
                raise RowError(lineno, f"expected 'token<TAB>valence', got {line!r}")
            token = parts[0]
            try:
                val = float(parts[1])
            except ValueError:
                raise RowError(lineno, f"bad valence {parts[1]!r}") from None
            if token in seen:
                if duplicates == "error":
                    raise DuplicateError(
                        f"{path}: token {token!r} on lines {seen[token]} and {lineno}")
                log.debug("%s: duplicate token %r (line %d wins)", path, token, lineno)
            seen[token] = lineno
            entries.append((token, val))
    if not entries:
        log.warning("lexicon %s is empty", path)
    return Lexicon(name or path.stem, tuple(entries))


def reference_lexicon_path() -> Path:
    return Path(resources.files("sentistock") / "data" / "vader_lexicon.txt")


_REFERENCE = None


def reference_lexicon() -> Lexicon:
    """The bundled VADER lexicon (7517 lines, 14 of them repeat a token)."""
    global _REFERENCE
    if _REFERENCE is None:
        _REFERENCE = load_lexicon(reference_lexicon_path(), "vader", duplicates="last")
    return _REFERENCE


def _strip_token(tok):
    stripped = tok.strip(string.punctuation)
    # two or fewer survivors: an emoticon or bare punctuation, keep verbatim
    return tok if len(stripped) <= 2 else stripped


def tokenize(text: str) -> list[str]:
    return [_strip_token(t) for t in text.split()]


def preprocess_tweet(text: str) -> str:
    """Drop URLs and @-mentions."""
    return _MENTION.sub(" ", _URL.sub(" ", text))


@dataclass(frozen=True)
class SentimentScore:
    pos: float
    neg: float
    neu: float
    compound: float


def _negated(word):
    return word in NEGATE or "n't" in word


def _booster(tok, valence, cap_diff):
    low = tok.lower()
    scalar = BOOSTERS.get(low, 0.0)
    if scalar:
        if valence < 0:
            scalar = -scalar
        if cap_diff and tok.isupper():
            scalar += C_INCR if valence > 0 else -C_INCR
    return scalar


class _Scorer:
    """Per-text state for the VADER rules.

    ``start``/``end`` delimit the lexicon hit (equal except for phrases);
    look-back rules are anchored on ``start``, everything else on ``end``.
    """

    def __init__(self, tokens, lexicon):
        self.tokens = tokens
        self.lower = [t.lower() for t in tokens]
        self.lex = lexicon
        n_caps = sum(t.isupper() for t in tokens)
        self.cap_diff = 0 < len(tokens) - n_caps < len(tokens)

    def word(self, j):
        return self.lower[j] if 0 <= j < len(self.lower) else ""

    def valence(self, base, start, end):
        lw, lex = self.word, self.lex
        v = base
        if lw(end) == "no" and end != len(self.lower) - 1 and lw(end + 1) in lex:
            v = 0.0
        if (start > 0 and lw(start - 1) == "no") or (start > 1 and lw(start - 2) == "no") or \
                (start > 2 and lw(start - 3) == "no" and lw(start - 1) in ("or", "nor")):
            v = base * N_SCALAR
        if self.cap_diff and self.tokens[end].isupper():
            v += C_INCR if v > 0 else -C_INCR
        for k in range(3):
            j = start - (k + 1)
            if start > k and lw(j) not in lex:
                s = _booster(self.tokens[j], v, self.cap_diff)
                if s:
                    s *= (1.0, 0.95, 0.9)[k]
                v += s
                v = self.negation(v, start, k)
                if k == 2:
                    v = self.idioms(v, start)
        return self.least(v, start)

    def negation(self, v, i, k):
        lw = self.word
        if k == 0:
            if _negated(lw(i - 1)):
                v *= N_SCALAR
        elif k == 1:
            if lw(i - 2) == "never" and lw(i - 1) in ("so", "this"):
                v *= 1.25
            elif lw(i - 2) == "without" and lw(i - 1) == "doubt":
                pass
            elif _negated(lw(i - 2)):
                v *= N_SCALAR
        else:
            if (lw(i - 3) == "never" and lw(i - 2) in ("so", "this")) or lw(i - 1) in ("so", "this"):
                v *= 1.25
            elif lw(i - 3) == "without" and (lw(i - 2) == "doubt" or lw(i - 1) == "doubt"):
                pass
            elif _negated(lw(i - 3)):
                v *= N_SCALAR
        return v

    def idioms(self, v, i):
        lw = self.word
        back = [f"{lw(i - 1)} {lw(i)}", f"{lw(i - 2)} {lw(i - 1)} {lw(i)}",
                f"{lw(i - 2)} {lw(i - 1)}", f"{lw(i - 3)} {lw(i - 2)} {lw(i - 1)}",
                f"{lw(i - 3)} {lw(i - 2)}"]
        for seq in back:
            if seq in SPECIAL_CASES:
                v = SPECIAL_CASES[seq]
                break
        n = len(self.lower)
        if n - 1 > i and f"{lw(i)} {lw(i + 1)}" in SPECIAL_CASES:
            v = SPECIAL_CASES[f"{lw(i)} {lw(i + 1)}"]
        if n - 1 > i + 1 and f"{lw(i)} {lw(i + 1)} {lw(i + 2)}" in SPECIAL_CASES:
            v = SPECIAL_CASES[f"{lw(i)} {lw(i + 1)} {lw(i + 2)}"]
        for gram in (back[3], back[4], back[2]):
            if gram in BOOSTERS:
                v += BOOSTERS[gram]
        return v

    def least(self, v, i):
        lw, lex = self.word, self.lex
        if i > 0 and lw(i - 1) == "least" and "least" not in lex:
            if i == 1 or lw(i - 2) not in ("at", "very"):
                v *= N_SCALAR
        return v

    def run(self):
        lower, lex = self.lower, self.lex
        phrases = {}
        for key in lex.phrases:
            phrases.setdefault(len(key.split(" ")), set()).add(key)
        out = []
        for i, low in enumerate(lower):
            if low in BOOSTERS or (low == "kind" and self.word(i + 1) == "of"):
                out.append(0.0)
                continue
            hit = None
            for n in (3, 2):
                if n in phrases and i - n + 1 >= 0:
                    key = " ".join(lower[i - n + 1:i + 1])
                    if key in phrases[n]:
                        hit = (lex.get(key), i - n + 1)
                        break
            if hit is not None:
                base, start = hit
                out[start:i] = [0.0] * (i - start)
                out.append(self.valence(base, start, i))
            elif low in lex:
                out.append(self.valence(lex.get(low), i, i))
            else:
                out.append(0.0)
        if "but" in lower:
            b = lower.index("but")
            out = [v * BUT_BEFORE if j < b else v * BUT_AFTER if j > b else v
                   for j, v in enumerate(out)]
        return out


def punctuation_amplifier(text):
    ep = min(text.count("!"), EP_MAX) * EP_INCR
    qm = text.count("?")
    if qm > 1:
        ep += qm * QM_INCR if qm <= 3 else QM_MAX_AMP
    return ep


def normalize(score, alpha=ALPHA):
    return max(-1.0, min(1.0, score / math.sqrt(score * score + alpha)))


def score_vader(text: str, lexicon: Lexicon | None = None) -> SentimentScore:
    lexicon = lexicon if lexicon is not None else reference_lexicon()
    tokens = tokenize(text)
    if not tokens:
        return SentimentScore(0.0, 0.0, 1.0, 0.0)
    sentiments = _Scorer(tokens, lexicon).run()
    total = sum(sentiments)
    amp = punctuation_amplifier(text)
    if total > 0:
        total += amp
    elif total < 0:
        total -= amp
    compound = normalize(total)

    pos_sum = neg_sum = 0.0
    neu = 0
    for s in sentiments:
        if s > 0:
            pos_sum += s + 1.0
        elif s < 0:
            neg_sum += s - 1.0
        else:
            neu += 1
    if pos_sum > -neg_sum:
        pos_sum += amp
    elif pos_sum < -neg_sum:
        neg_sum -= amp
    denom = pos_sum - neg_sum + neu
    return SentimentScore(pos_sum / denom, -neg_sum / denom if neg_sum else 0.0,
                          neu / denom, compound)


def score_tweet(text: str, lexicon: Lexicon | None = None) -> SentimentScore:
    return score_vader(preprocess_tweet(text), lexicon)


def score_additive(text: str, lexicon: Lexicon) -> float:
    """Sum of valences of the case-folded tokens found in ``lexicon``."""
    total = 0.0
    for tok in tokenize(text):
        total += lexicon.valence.get(tok.lower(), 0.0)
    return total


def classify(compound: float, pos_threshold: float = 0.05,
             neg_threshold: float = -0.05) -> SentimentLabel:
    if not neg_threshold < pos_threshold:
        raise ConfigError(f"neg_threshold {neg_threshold} must be below "
                          f"pos_threshold {pos_threshold}")
    if compound >= pos_threshold:
        return SentimentLabel.POSITIVE
    if compound <= neg_threshold:
        return SentimentLabel.NEGATIVE
    return SentimentLabel.NEUTRAL
