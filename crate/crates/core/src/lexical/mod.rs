pub mod text;
pub mod tfidf;
pub mod word2vec;

pub use text::{normalize_text, tokenize, Lemmatizer, PosTag, RuleLemmatizer, StopWords, TokenizedDocument};
pub use tfidf::{tfidf_fit, tfidf_transform, SparseVec, TfidfModel};
pub use word2vec::{embed_document, train_word_embeddings, DocEmbedding, EmbeddingConfig, EmbeddingTable};
