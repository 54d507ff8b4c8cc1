"""Transportation DEIA indicators from geotagged short-text posts."""

__version__ = "0.1.0"

from .corpus import BoundingBox, CleanPost, RawPost, TextPreprocessor  # noqa: E402
from .geodemo import TractAssigner  # noqa: E402
from .ngram import ExchangeWordClusterer  # noqa: E402
from .relevance import RelevanceFilter  # noqa: E402
from .sentiment import LexiconSentimentScorer  # noqa: E402
from .topics import GibbsLDA  # noqa: E402

__all__ = [
    "BoundingBox",
    "CleanPost",
    "RawPost",
    "TextPreprocessor",
    "RelevanceFilter",
    "LexiconSentimentScorer",
    "ExchangeWordClusterer",
    "GibbsLDA",
    "TractAssigner",
]
