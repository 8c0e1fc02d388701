"""Static word banks shared by the corpus generator, mining, and prompts.

Everything here is a code constant so that vocabularies, explanations and
prompt templates rebuild deterministically from a corpus file alone.
"""

from __future__ import annotations

from .tokenizer import split_text

FUNCTION_WORDS = ["the", "a", "this", "that", "my", "its", "some", "each"]

FILLER_WORDS = [
    "time", "way", "thing", "day", "part", "place", "work", "hand",
    "case", "point", "group", "fact", "idea", "side", "week", "house",
    "story", "line", "word", "end", "turn", "piece", "note", "year",
]

INTENSIFIERS = ["very", "quite", "rather"]

# topic name -> eight signature keywords
TOPIC_BANK = [
    ("weather", ["rain", "wind", "storm", "cloud", "frost", "thunder", "fog", "hail"]),
    ("cooking", ["broth", "spice", "onion", "skillet", "simmer", "garlic", "stew", "pepper"]),
    ("music", ["melody", "chord", "rhythm", "violin", "tempo", "verse", "drum", "tune"]),
    ("gardening", ["soil", "seedling", "mulch", "pruning", "compost", "trellis", "bloom", "weed"]),
    ("astronomy", ["nebula", "orbit", "telescope", "comet", "eclipse", "galaxy", "lunar", "meteor"]),
    ("sailing", ["harbor", "mast", "rudder", "tide", "anchor", "hull", "breeze", "knot"]),
    ("chess", ["gambit", "bishop", "endgame", "pawn", "castling", "rook", "checkmate", "opening"]),
    ("pottery", ["kiln", "glaze", "clay", "wheel", "slip", "bisque", "fired", "vessel"]),
    ("cycling", ["saddle", "sprocket", "crank", "peloton", "descent", "spoke", "gear", "climb"]),
    ("photography", ["lens", "aperture", "shutter", "exposure", "tripod", "negative", "focus", "frame"]),
    ("fishing", ["reel", "bait", "lure", "trout", "cast", "hook", "stream", "tackle"]),
    ("weaving", ["loom", "warp", "weft", "shuttle", "thread", "yarn", "heddle", "selvage"]),
]

# style factor descriptors, indexed by the factor's integer value
SENTENCE_DESC = {0: "short sentences", 1: "medium sentences", 2: "long sentences"}
COMMA_DESC = {0: "rare commas", 1: "frequent commas"}
ENDING_DESC = {0: "plain endings", 1: "exclaimed endings"}
INTENSIFIER_DESC = {i: f"heavy {w} usage" for i, w in enumerate(INTENSIFIERS)}

FACTOR_DESCRIPTORS = (SENTENCE_DESC, COMMA_DESC, ENDING_DESC, INTENSIFIER_DESC)

# every word that can appear in a factor descriptor phrase
FACTOR_VOCABULARY = sorted({
    w for table in FACTOR_DESCRIPTORS for phrase in table.values()
    for w in phrase.split()
})

TEMPLATE_RECONSTRUCTION = (
    "given the style representation and content representation of a text , "
    "reconstruct the original text . "
    "style representation : <placeholder> content representation : <placeholder> ."
)

TEMPLATE_STYLE_DISCRIMINATION = (
    "given two style representations , determine if they are written by the "
    "same author or not . answer in json with fields ' determination ' and "
    "' explaination ' . text 1 's style representation : <placeholder> "
    "text 2 's style representation : <placeholder> ."
)

TEMPLATE_CONTENT_DISCRIMINATION = (
    "given two content representations , determine if they express the same "
    "core content . answer in json with fields ' determination ' and "
    "' explaination ' . text 1 's content representation : <placeholder> "
    "text 2 's content representation : <placeholder> ."
)

_EXPLANATION_WORDS = [
    "both", "texts", "show", "shows", "text", "1", "2", "while", "discuss",
    "discusses", "and", "same", "different", "author", "content",
    "determination", "explaination", "explanation",
]

_DECISION_PUNCT = ["{", "}", '"', ":", ",", "'", "."]


def static_extra_tokens() -> list[str]:
    """Tokens that must exist in every vocabulary besides corpus words."""
    words: list[str] = []
    for template in (TEMPLATE_RECONSTRUCTION, TEMPLATE_STYLE_DISCRIMINATION,
                     TEMPLATE_CONTENT_DISCRIMINATION):
        words.extend(t for t in split_text(template) if t not in ("<", ">"))
    words.extend(_EXPLANATION_WORDS)
    words.extend(_DECISION_PUNCT)
    words.extend(FACTOR_VOCABULARY)
    words.extend(FUNCTION_WORDS)
    words.extend(FILLER_WORDS)
    words.extend(INTENSIFIERS)
    for _, keywords in TOPIC_BANK:
        words.extend(keywords)
    words.extend(["placeholder"])
    return sorted(set(words))
