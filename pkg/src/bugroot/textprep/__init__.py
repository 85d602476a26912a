"""Text normalization: camel-case splitting, filtering and Porter stemming."""

from bugroot.textprep.normalize import (
    DEFAULT_KEYWORDS,
    DEFAULT_STOPWORDS,
    Pipeline,
    PrepConfig,
    TokenStream,
    build_spell_vocab,
    camel_split,
    expand_contractions,
    load_term_list,
    load_wordclasses,
    normalize,
    singularize,
    spell_correct,
)
from bugroot.textprep.porter import porter_stem

__all__ = [
    "DEFAULT_KEYWORDS",
    "DEFAULT_STOPWORDS",
    "Pipeline",
    "PrepConfig",
    "TokenStream",
    "build_spell_vocab",
    "camel_split",
    "expand_contractions",
    "load_term_list",
    "load_wordclasses",
    "normalize",
    "porter_stem",
    "singularize",
    "spell_correct",
]
