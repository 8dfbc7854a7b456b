"""ctxvec: induce embeddings for text features from their corpus contexts.

Given pretrained word vectors and the corpus they were trained on, learn the
linear map that reconstructs each word's vector from the average of its
context-word sums, then apply that map to the contexts of anything else:
rare words, n-grams, or annotated features, from as little as one example.
"""

from .classify import LinearClassifier, evaluate_on_test, train_linear_classifier
from .context import (
    ContextAccumulator,
    accumulate,
    accumulate_lines,
    baseline_additive,
    baseline_sif_weighted,
    finalize,
    parse_feature_text,
    principal_directions,
    read_feature_contexts,
    remove_top_components,
)
from .corpus import (
    ContextWindow,
    TextCorpus,
    Vocabulary,
    build_vocabulary,
    join_ngram_key,
    scan_ngram_contexts,
    scan_word_contexts,
    split_ngram_key,
    tokenize,
)
from .docembed import (
    DocumentEmbedding,
    LabeledDocument,
    embed_corpus,
    embed_document,
    read_documents,
)
from .embedstore import (
    EmbeddingStore,
    load_binary_embeddings,
    load_embeddings,
    load_text_embeddings,
    save_binary_embeddings,
    save_embeddings,
    save_text_embeddings,
)
from .errors import CtxvecError, DimensionMismatchError, FormatError
from .evaluation import (
    EvalReport,
    FewShotBenchmark,
    SimilarityPair,
    cosine,
    disambiguate,
    evaluate_chimeras,
    make_inducer,
    rank_retrieval,
    read_chimera_tsv,
    read_pairs,
    run_fewshot_protocol,
    spearman,
)
from .synth import (
    FewshotData,
    SenseData,
    generate_fewshot_benchmark,
    generate_sense_corpus,
    generate_synthetic_corpus,
)
from .transform import (
    FitDiagnostics,
    Transform,
    WeightFunction,
    apply_transform,
    fit_report,
    learn_transform,
    load_transform,
    save_transform,
    split_keys,
)

__version__ = "0.1.0"
