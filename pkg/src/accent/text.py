"""Tokenization, stopwords and the naive default tagger/lemmatizer.

These are deliberately simple so the package stays hermetic. Production
runs can swap in a real POS tagger and lemmatizer wherever a ``tagger`` or
``lemmatizer`` argument is accepted.
"""

from __future__ import annotations

import re

# NLTK's English stopword list.
STOPWORDS = frozenset("""
i me my myself we our ours ourselves you you're you've you'll you'd your yours
yourself yourselves he him his himself she she's her hers herself it it's its
itself they them their theirs themselves what which who whom this that that'll
these those am is are was were be been being have has had having do does did
doing a an the and but if or because as until while of at by for with about
against between into through during before after above below to from up down
in out on off over under again further then once here there when where why how
all any both each few more most other some such no nor not only own same so
than too very s t can will just don don't should should've now d ll m o re ve y
ain aren aren't couldn couldn't didn didn't doesn doesn't hadn hadn't hasn
hasn't haven haven't isn isn't ma mightn mightn't mustn mustn't needn needn't
shan shan't shouldn shouldn't wasn wasn't weren weren't won won't wouldn
wouldn't
""".split())

PERSON_VARIABLES = frozenset({"personx", "persony", "personz"})

_WORD = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


_VOWELS = set("aeiou")


def lemmatize(word: str) -> str:
    """Suffix-stripping lemmatizer covering regular English inflection."""
    w = word.lower()
    if w.endswith("'s"):
        w = w[:-2]
    if len(w) > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 4 and w.endswith(("sses", "shes", "ches", "xes")):
        return w[:-2]
    if len(w) > 3 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
        return w[:-1]
    for suffix in ("ing", "ed"):
        if len(w) > len(suffix) + 2 and w.endswith(suffix):
            stem = w[: -len(suffix)]
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz":
                return stem[:-1]
            if not any(c in _VOWELS for c in stem):
                return w
            return stem
    return w


# Closed-class words the default tagger never treats as content.
_CLOSED_CLASS = {
    "PRON": "i me my mine we us our ours you your yours he him his she her hers it its they them their theirs "
            "myself yourself himself herself itself ourselves themselves this that these those who whom whose "
            "what which everyone someone anyone nobody something anything nothing everything",
    "DET": "a an the some any no every each all both either neither another such",
    "ADP": "of at by for with about against between into through during before after above below to from up "
           "down in out on off over under around near without within upon",
    "CCONJ": "and but or nor so yet",
    "SCONJ": "if because as until while although though since unless whether than",
    "AUX": "am is are was were be been being have has had having do does did doing can could will would "
           "shall should may might must ain't don't doesn't didn't can't won't isn't aren't wasn't weren't",
    "ADV": "not very too just now then here there when where why how again once only also even still already "
           "never always often sometimes soon really quite yes",
    "INTJ": "oh hi hello hey wow lol ok okay yeah yep nope um uh please thanks",
}
_LEXICON = {w: tag for tag, words in _CLOSED_CLASS.items() for w in words.split()}

CONTENT_TAGS = frozenset({"NOUN", "VERB", "ADJ"})


def default_tagger(tokens: list[str]) -> list[tuple[str, str]]:
    """Lexicon-plus-suffix tagger returning coarse universal POS tags."""
    tagged = []
    for tok in tokens:
        tag = _LEXICON.get(tok)
        if tag is None:
            if tok.isdigit():
                tag = "NUM"
            elif tok.endswith("ly") and len(tok) > 4:
                tag = "ADV"
            elif tok.endswith(("ing", "ed", "ize", "ise")):
                tag = "VERB"
            elif tok.endswith(("ous", "ful", "able", "ible", "ive", "less", "ic", "al")):
                tag = "ADJ"
            else:
                tag = "NOUN"
        tagged.append((tok, tag))
    return tagged


def content_words(text: str, stopwords=STOPWORDS, lemmatizer=lemmatize) -> set[str]:
    """Lemmatized, non-stopword tokens of ``text`` with Person variables removed."""
    words = set()
    for tok in tokenize(text):
        if tok in stopwords or tok in PERSON_VARIABLES:
            continue
        lemma = lemmatizer(tok)
        if lemma and lemma not in stopwords:
            words.add(lemma)
    return words
