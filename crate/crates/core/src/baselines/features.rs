//! Feature providers: a dense row-major matrix, native TF-IDF,
//! embedding-file loading, and an embeddings-endpoint fetcher that
//! reuses the chat gateway's transport, cache, and rate limiting.

use super::BaselineError;
use crate::corpus::Corpus;
use crate::gateway::{
    BackendError, BackendReply, ChatBackend, ChatRequest, Gateway, GatewayConfig,
};
use async_trait::async_trait;
use serde::Deserialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// Dense row-major feature matrix with review ids attached to rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    values: Vec<f64>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn from_rows(row_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, BaselineError> {
        if row_ids.len() != rows.len() {
            return Err(BaselineError::LengthMismatch {
                rows: rows.len(),
                labels: row_ids.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (id, row) in row_ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(BaselineError::DimMismatch {
                    expected: dim,
                    found: row.len(),
                    context: format!("row {id}"),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(BaselineError::BadEmbeddingFile(format!(
                    "row {id} contains a non-finite value"
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(FeatureMatrix {
            dim,
            values,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim.max(1))
    }

    /// Sub-matrix with the given rows, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<FeatureMatrix, BaselineError> {
        let index: HashMap<&str, usize> = self
            .row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(ids.len());
        for id in ids {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| BaselineError::MissingReviewId(id.clone()))?;
            rows.push(self.row(i).to_vec());
        }
        FeatureMatrix::from_rows(ids.to_vec(), rows)
    }
}

/// TF-IDF output: the matrix plus the vocabulary and idf weights that
/// produced it, for auditability.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfFeatures {
    pub matrix: FeatureMatrix,
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Builds TF-IDF features: lowercased alphanumeric tokens, vocabulary
/// capped at `max_vocab` terms by document frequency (ties broken
/// alphabetically), idf = ln((1+N)/(1+df)) + 1 on raw term counts, and
/// L2-normalized rows. Pure in its inputs.
pub fn tfidf_features(corpus: &Corpus, max_vocab: usize) -> Result<TfidfFeatures, BaselineError> {
    if corpus.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    if max_vocab == 0 {
        return Err(BaselineError::InvalidParameter(
            "max_vocab must be positive".to_string(),
        ));
    }

    let docs: Vec<Vec<String>> = corpus.reviews.iter().map(|r| tokenize(&r.text)).collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &docs {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for term in unique {
            *df.entry(term).or_insert(0) += 1;
        }
    }

    let mut ranked: Vec<(&str, usize)> = df.iter().map(|(t, d)| (*t, *d)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_vocab);

    let n = docs.len() as f64;
    let vocabulary: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
    let idf: Vec<f64> = ranked
        .iter()
        .map(|(_, df)| ((1.0 + n) / (1.0 + *df as f64)).ln() + 1.0)
        .collect();
    let column: HashMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut rows = Vec::with_capacity(docs.len());
    for doc in &docs {
        let mut row = vec![0.0; vocabulary.len()];
        for token in doc {
            if let Some(&j) = column.get(token.as_str()) {
                row[j] += idf[j];
            }
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut row {
                *v /= norm;
            }
        }
        rows.push(row);
    }

    let row_ids = corpus.reviews.iter().map(|r| r.id.clone()).collect();
    Ok(TfidfFeatures {
        matrix: FeatureMatrix::from_rows(row_ids, rows)?,
        vocabulary,
        idf,
    })
}

#[derive(Debug, Deserialize)]
struct EmbeddingHeader {
    dim: usize,
    #[allow(dead_code)]
    model: String,
}

#[derive(Debug, Deserialize)]
struct EmbeddingRow {
    review_id: String,
    vector: Vec<f64>,
}

/// Loads an embedding JSONL file — header line `{"dim": D, "model":
/// name}`, then one `{review_id, vector}` per line — and returns rows
/// in corpus order. Every corpus review must be present.
pub fn load_embeddings(
    reader: impl BufRead,
    corpus: &Corpus,
) -> Result<FeatureMatrix, BaselineError> {
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| BaselineError::BadEmbeddingFile("file is empty".to_string()))?
        .map_err(|e| BaselineError::BadEmbeddingFile(e.to_string()))?;
    let header: EmbeddingHeader = serde_json::from_str(&header_line)
        .map_err(|e| BaselineError::BadEmbeddingFile(format!("bad header line: {e}")))?;

    let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
    for (line_no, line) in lines.enumerate() {
        let line = line.map_err(|e| BaselineError::BadEmbeddingFile(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EmbeddingRow = serde_json::from_str(&line).map_err(|e| {
            BaselineError::BadEmbeddingFile(format!("line {}: {e}", line_no + 2))
        })?;
        if row.vector.len() != header.dim {
            return Err(BaselineError::DimMismatch {
                expected: header.dim,
                found: row.vector.len(),
                context: format!("embedding row for review {}", row.review_id),
            });
        }
        by_id.insert(row.review_id, row.vector);
    }

    let mut ids = Vec::with_capacity(corpus.len());
    let mut rows = Vec::with_capacity(corpus.len());
    for review in &corpus.reviews {
        let vector = by_id
            .remove(&review.id)
            .ok_or_else(|| BaselineError::MissingReviewId(review.id.clone()))?;
        ids.push(review.id.clone());
        rows.push(vector);
    }
    FeatureMatrix::from_rows(ids, rows)
}

/// Which embeddings endpoint model to call and the dimension it must
/// return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingsSpec {
    pub model: String,
    pub dim: usize,
}

/// Transport half of the embeddings fetcher: one text in, one vector
/// out. The gateway supplies caching, retries, and rate limiting on
/// top.
#[async_trait]
pub trait EmbeddingTransport: Send + Sync {
    async fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>, BackendError>;
    fn describe(&self) -> String;
}

/// Adapts an `EmbeddingTransport` to the chat backend interface so the
/// existing gateway machinery (cache keyed by (model, text), bounded
/// retries, in-flight limit) applies unchanged. The vector rides in
/// `raw_text` as JSON, which round-trips f64 exactly.
struct TransportAdapter(Arc<dyn EmbeddingTransport>);

#[async_trait]
impl ChatBackend for TransportAdapter {
    async fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError> {
        let vector = self.0.embed(&request.model, &request.user_message).await?;
        Ok(BackendReply {
            raw_text: serde_json::to_string(&vector).expect("vector serializes"),
            model_echo: request.model.clone(),
        })
    }

    fn describe(&self) -> String {
        self.0.describe()
    }
}

/// Fetches one embedding per review through the gateway. Rows come back
/// in corpus order; a warm cache means zero transport calls.
pub async fn fetch_embeddings(
    corpus: &Corpus,
    transport: Arc<dyn EmbeddingTransport>,
    spec: &EmbeddingsSpec,
    config: GatewayConfig,
) -> Result<FeatureMatrix, BaselineError> {
    if corpus.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    let gateway = Gateway::new(Arc::new(TransportAdapter(transport)), config)?;
    let requests: Vec<ChatRequest> = corpus
        .reviews
        .iter()
        .map(|review| ChatRequest {
            model: spec.model.clone(),
            temperature: 0.0,
            system_message: "embedding".to_string(),
            user_message: review.text.clone(),
            max_tokens: 1,
        })
        .collect();

    let responses = gateway.complete_batch(&requests).await;
    let mut ids = Vec::with_capacity(corpus.len());
    let mut rows = Vec::with_capacity(corpus.len());
    for (review, response) in corpus.reviews.iter().zip(responses) {
        let response = response?;
        let vector: Vec<f64> = serde_json::from_str(&response.raw_text).map_err(|e| {
            BaselineError::BadEmbeddingFile(format!(
                "embedding reply for review {} does not parse: {e}",
                review.id
            ))
        })?;
        if vector.len() != spec.dim {
            return Err(BaselineError::DimMismatch {
                expected: spec.dim,
                found: vector.len(),
                context: format!("embedding reply for review {}", review.id),
            });
        }
        ids.push(review.id.clone());
        rows.push(vector);
    }
    FeatureMatrix::from_rows(ids, rows)
}

/// OpenAI-style embeddings endpoint: POST {model, input}, read
/// data[0].embedding.
pub struct HttpEmbeddingTransport {
    client: reqwest::Client,
    endpoint_url: String,
    api_key: String,
}

impl HttpEmbeddingTransport {
    pub fn new(endpoint_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        HttpEmbeddingTransport {
            client: reqwest::Client::new(),
            endpoint_url: endpoint_url.into(),
            api_key: api_key.into(),
        }
    }

    fn scrub(&self, text: &str) -> String {
        if self.api_key.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.api_key, "[redacted]")
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingsDatum>,
}

#[derive(Deserialize)]
struct EmbeddingsDatum {
    embedding: Vec<f64>,
}

#[async_trait]
impl EmbeddingTransport for HttpEmbeddingTransport {
    async fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>, BackendError> {
        let body = serde_json::json!({ "model": model, "input": text });
        let response = self
            .client
            .post(&self.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| BackendError::Transient {
                detail: self.scrub(&e.to_string()),
            })?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth);
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient {
                detail: format!("HTTP {status}"),
            });
        }
        if !status.is_success() {
            return Err(BackendError::Permanent {
                detail: format!("HTTP {status}"),
            });
        }
        let text_body = response.text().await.map_err(|e| BackendError::Transient {
            detail: self.scrub(&e.to_string()),
        })?;
        let parsed: EmbeddingsResponse =
            serde_json::from_str(&text_body).map_err(|e| BackendError::Malformed {
                detail: format!("embeddings body does not parse: {e}"),
            })?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| BackendError::Malformed {
                detail: "embeddings body has an empty data array".to_string(),
            })
    }

    fn describe(&self) -> String {
        format!("openai-compatible embeddings endpoint at {}", self.endpoint_url)
    }
}

/// Deterministic in-process transport for tests and offline runs:
/// scripted vectors per text, otherwise a unit basis vector chosen by
/// text digest.
pub struct MockEmbeddingTransport {
    dim: usize,
    scripted: Mutex<HashMap<String, Vec<f64>>>,
    calls: AtomicUsize,
}

impl MockEmbeddingTransport {
    pub fn new(dim: usize) -> Self {
        MockEmbeddingTransport {
            dim,
            scripted: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn script(&self, text: &str, vector: Vec<f64>) {
        self.scripted
            .lock()
            .expect("scripts lock")
            .insert(text.to_string(), vector);
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl EmbeddingTransport for MockEmbeddingTransport {
    async fn embed(&self, _model: &str, text: &str) -> Result<Vec<f64>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(vector) = self.scripted.lock().expect("scripts lock").get(text) {
            return Ok(vector.clone());
        }
        use sha2::Digest;
        let digest = sha2::Sha256::digest(text.as_bytes());
        let mut vector = vec![0.0; self.dim];
        vector[digest[0] as usize % self.dim.max(1)] = 1.0;
        Ok(vector)
    }

    fn describe(&self) -> String {
        format!("mock embeddings (dim {})", self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Review};

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Review::new(format!("r{}", i + 1), *t))
                .collect(),
            "test corpus",
        )
    }

    #[test]
    fn matrix_shape_and_access() {
        let m = FeatureMatrix::from_rows(
            vec!["a".to_string(), "b".to_string()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.dim(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.rows().count(), 2);
    }

    #[test]
    fn matrix_rejects_ragged_and_non_finite_rows() {
        let ragged = FeatureMatrix::from_rows(
            vec!["a".to_string(), "b".to_string()],
            vec![vec![1.0, 2.0], vec![3.0]],
        );
        assert!(matches!(ragged, Err(BaselineError::DimMismatch { .. })));
        let nan = FeatureMatrix::from_rows(vec!["a".to_string()], vec![vec![f64::NAN]]);
        assert!(nan.is_err());
    }

    #[test]
    fn identical_documents_get_identical_rows() {
        let c = corpus(&["great app works well", "great app works well", "other text"]);
        let features = tfidf_features(&c, 50).unwrap();
        assert_eq!(features.matrix.row(0), features.matrix.row(1));
        assert_ne!(features.matrix.row(0), features.matrix.row(2));
    }

    #[test]
    fn ubiquitous_term_has_minimal_idf() {
        let c = corpus(&["common alpha", "common beta", "common gamma"]);
        let features = tfidf_features(&c, 50).unwrap();
        let i = features
            .vocabulary
            .iter()
            .position(|t| t == "common")
            .unwrap();
        // df = N → idf = ln((1+N)/(1+N)) + 1 = 1, the smallest possible.
        assert!((features.idf[i] - 1.0).abs() < 1e-12);
        assert!(features.idf.iter().all(|&v| v >= features.idf[i]));
    }

    // Hand-computed grid for a 5-document corpus; values frozen from
    // manual evaluation of idf = ln((1+N)/(1+df)) + 1 with raw term
    // counts and L2-normalized rows.
    #[test]
    fn five_document_golden_grid() {
        let c = corpus(&[
            "slow app slow",
            "great app",
            "crash crash crash",
            "slow crash",
            "great feature",
        ]);
        let features = tfidf_features(&c, 10).unwrap();
        // df: app 2, crash 2, great 2, slow 2, feature 1.
        assert_eq!(
            features.vocabulary,
            vec!["app", "crash", "great", "slow", "feature"]
        );
        let expected = [
            // columns: app, crash, great, slow, feature
            [FRAC_1_SQRT_5, 0.0, 0.0, FRAC_2_SQRT_5, 0.0],
            [FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0],
            [0.0, 0.0, D5_GREAT, 0.0, D5_FEATURE],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                let got = features.matrix.row(i)[j];
                assert!(
                    (got - want).abs() < 1e-9,
                    "cell ({i},{j}): got {got}, want {want}"
                );
            }
        }
    }

    // Constants for the golden grid above.
    const FRAC_1_SQRT_5: f64 = 0.4472135954999579;
    const FRAC_2_SQRT_5: f64 = 0.8944271909999159;
    const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
    const D5_GREAT: f64 = 0.6279137616509933;
    const D5_FEATURE: f64 = 0.7782829228046183;

    #[test]
    fn vocabulary_is_capped_by_document_frequency() {
        let c = corpus(&["a b c", "a b", "a"]);
        let features = tfidf_features(&c, 2).unwrap();
        assert_eq!(features.vocabulary, vec!["a", "b"]);
        assert_eq!(features.matrix.dim(), 2);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let c = Corpus::new(vec![], "empty");
        assert!(matches!(
            tfidf_features(&c, 10),
            Err(BaselineError::EmptyCorpus)
        ));
    }

    #[test]
    fn embeddings_load_in_corpus_order() {
        let c = corpus(&["first", "second"]);
        let file = "{\"dim\": 3, \"model\": \"toy\"}\n\
                    {\"review_id\": \"r2\", \"vector\": [0.0, 1.0, 0.0]}\n\
                    {\"review_id\": \"r1\", \"vector\": [1.0, 0.0, 0.0]}\n";
        let matrix = load_embeddings(file.as_bytes(), &c).unwrap();
        assert_eq!(matrix.dim(), 3);
        assert_eq!(matrix.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(matrix.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn embedding_file_guards() {
        let c = corpus(&["first"]);
        let wrong_dim = "{\"dim\": 3, \"model\": \"toy\"}\n\
                         {\"review_id\": \"r1\", \"vector\": [1.0]}\n";
        match load_embeddings(wrong_dim.as_bytes(), &c).unwrap_err() {
            BaselineError::DimMismatch { expected, found, context } => {
                assert_eq!((expected, found), (3, 1));
                assert!(context.contains("r1"));
            }
            other => panic!("expected DimMismatch, got {other:?}"),
        }

        let empty = "{\"dim\": 3, \"model\": \"toy\"}\n";
        assert!(matches!(
            load_embeddings(empty.as_bytes(), &c).unwrap_err(),
            BaselineError::MissingReviewId(id) if id == "r1"
        ));

        let no_header = "{\"review_id\": \"r1\", \"vector\": [1.0]}\n";
        assert!(matches!(
            load_embeddings(no_header.as_bytes(), &c).unwrap_err(),
            BaselineError::BadEmbeddingFile(_)
        ));
    }

    #[tokio::test]
    async fn fetch_returns_scripted_basis_vectors() {
        let c = corpus(&["first", "second", "third"]);
        let transport = Arc::new(MockEmbeddingTransport::new(3));
        transport.script("first", vec![1.0, 0.0, 0.0]);
        transport.script("second", vec![0.0, 1.0, 0.0]);
        transport.script("third", vec![0.0, 0.0, 1.0]);
        let spec = EmbeddingsSpec {
            model: "toy-embedder".to_string(),
            dim: 3,
        };
        let matrix = fetch_embeddings(&c, transport, &spec, GatewayConfig::default())
            .await
            .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(matrix.row(i)[j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[tokio::test]
    async fn warm_cache_means_zero_transport_calls() {
        let dir = tempfile::tempdir().unwrap();
        let c = corpus(&["first", "second"]);
        let spec = EmbeddingsSpec {
            model: "toy-embedder".to_string(),
            dim: 4,
        };
        let config = GatewayConfig {
            cache_path: Some(dir.path().join("embeddings.jsonl")),
            ..GatewayConfig::default()
        };

        let cold = Arc::new(MockEmbeddingTransport::new(4));
        let first = fetch_embeddings(&c, cold.clone(), &spec, config.clone())
            .await
            .unwrap();
        assert_eq!(cold.calls(), 2);

        let warm = Arc::new(MockEmbeddingTransport::new(4));
        let second = fetch_embeddings(&c, warm.clone(), &spec, config)
            .await
            .unwrap();
        assert_eq!(warm.calls(), 0);
        assert_eq!(first, second);
    }

    #[tokio::test]
    async fn fetched_dimension_is_checked() {
        let c = corpus(&["first"]);
        let transport = Arc::new(MockEmbeddingTransport::new(3));
        transport.script("first", vec![1.0, 0.0]); // declared dim is 3
        let spec = EmbeddingsSpec {
            model: "toy-embedder".to_string(),
            dim: 3,
        };
        let err = fetch_embeddings(&c, transport, &spec, GatewayConfig::default())
            .await
            .unwrap_err();
        assert!(matches!(err, BaselineError::DimMismatch { expected: 3, found: 2, .. }));
    }

    #[test]
    fn select_reorders_and_subsets_rows() {
        let m = FeatureMatrix::from_rows(
            vec!["a".to_string(), "b".to_string(), "c".to_string()],
            vec![vec![1.0], vec![2.0], vec![3.0]],
        )
        .unwrap();
        let sub = m.select(&["c".to_string(), "a".to_string()]).unwrap();
        assert_eq!(sub.row(0), &[3.0]);
        assert_eq!(sub.row(1), &[1.0]);
        assert!(matches!(
            m.select(&["missing".to_string()]),
            Err(BaselineError::MissingReviewId(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Pure function: same corpus, same matrix, and rows have
            // unit (or zero) L2 norm.
            #[test]
            fn tfidf_deterministic_and_normalized(
                texts in prop::collection::vec("[a-c ]{1,30}", 1..12),
                max_vocab in 1usize..20,
            ) {
                let c = corpus(&texts.iter().map(String::as_str).collect::<Vec<_>>());
                let a = tfidf_features(&c, max_vocab);
                let b = tfidf_features(&c, max_vocab);
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(&a, &b);
                        for row in a.matrix.rows() {
                            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                            prop_assert!(norm < 1e-12 || (norm - 1.0).abs() < 1e-9);
                        }
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "determinism violated at the Result level"),
                }
            }
        }
    }
}
