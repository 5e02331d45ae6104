//! Corpus file formats.
//!
//! The native format is line-delimited JSON: an optional header object
//! carrying `schema` and `provenance`, then one `{id, text, label, pair_id?,
//! meta}` record per line. Upstream dataset layouts are converted on load.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{at_to_single_label, Authorship, Corpus, CorpusError, Doc, Label, Schema};
use crate::emotaxon::{EkmanLabel, RawEmotionLabel, SourceScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Native records of any schema; header line required.
    CorpusJsonl,
    /// Binary-authorship records, native or RealNews-style (`article`, `title`, ...).
    NewssynthJsonl,
    GneCsv,
    AffectiveTextXmlish,
    Sst2Tsv,
    Chatgpt100Jsonl,
}

impl CorpusFormat {
    pub const ALL: [CorpusFormat; 6] = [
        CorpusFormat::CorpusJsonl,
        CorpusFormat::NewssynthJsonl,
        CorpusFormat::GneCsv,
        CorpusFormat::AffectiveTextXmlish,
        CorpusFormat::Sst2Tsv,
        CorpusFormat::Chatgpt100Jsonl,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CorpusFormat::CorpusJsonl => "corpus-jsonl",
            CorpusFormat::NewssynthJsonl => "newssynth-jsonl",
            CorpusFormat::GneCsv => "gne-csv",
            CorpusFormat::AffectiveTextXmlish => "affectivetext-xmlish",
            CorpusFormat::Sst2Tsv => "sst2-tsv",
            CorpusFormat::Chatgpt100Jsonl => "chatgpt100-jsonl",
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.tag() == s.trim())
            .ok_or_else(|| CorpusError::Unknown {
                kind: "corpus format",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    version: Option<u32>,
    schema: Schema,
    #[serde(default)]
    provenance: Vec<String>,
}

const NATIVE_FORMAT: &str = "emodetect-corpus";

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::FileNotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let source = format!("{}:{}", format.tag(), path.display());
    if format == CorpusFormat::AffectiveTextXmlish {
        let gold = sibling_gold_file(path);
        let gold_text = match gold {
            Some(g) if g.exists() => Some(fs::read_to_string(&g).map_err(|source| CorpusError::Io {
                path: g.clone(),
                source,
            })?),
            _ => None,
        };
        return parse_affective_text(&text, gold_text.as_deref(), &source);
    }
    parse_corpus(&text, format, &source)
}

/// Parses corpus content already in memory. `source` lands in provenance.
pub fn parse_corpus(text: &str, format: CorpusFormat, source: &str) -> Result<Corpus, CorpusError> {
    match format {
        CorpusFormat::CorpusJsonl => parse_jsonl(text, None, source),
        CorpusFormat::NewssynthJsonl | CorpusFormat::Chatgpt100Jsonl => {
            parse_jsonl(text, Some(Schema::BinaryAuthorship), source)
        }
        CorpusFormat::GneCsv => parse_gne_csv(text, source),
        CorpusFormat::AffectiveTextXmlish => parse_affective_text(text, None, source),
        CorpusFormat::Sst2Tsv => parse_sst2(text, source),
    }
}

fn violation(line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::FormatViolation {
        line,
        reason: reason.into(),
    }
}

struct Builder {
    schema: Schema,
    docs: Vec<Doc>,
    ids: HashSet<String>,
}

impl Builder {
    fn new(schema: Schema) -> Self {
        Self {
            schema,
            docs: Vec::new(),
            ids: HashSet::new(),
        }
    }

    fn push(&mut self, line: usize, doc: Doc) -> Result<(), CorpusError> {
        if doc.text.trim().is_empty() {
            return Err(violation(line, "empty text"));
        }
        if doc.label.schema() != self.schema {
            return Err(violation(
                line,
                format!("label {:?} is not in schema {}", doc.label.as_str(), self.schema),
            ));
        }
        if !self.ids.insert(doc.id.clone()) {
            return Err(violation(line, format!("duplicate id {:?}", doc.id)));
        }
        self.docs.push(doc);
        Ok(())
    }

    fn finish(self, provenance: Vec<String>) -> Result<Corpus, CorpusError> {
        Corpus::new(self.schema, self.docs, provenance)
    }
}

fn parse_jsonl(text: &str, required: Option<Schema>, source: &str) -> Result<Corpus, CorpusError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let mut provenance = Vec::new();
    let mut schema = required;
    if let Some((line_no, first)) = lines.peek().copied() {
        let value: Value = serde_json::from_str(first).map_err(|e| violation(line_no, e.to_string()))?;
        if value.get("schema").is_some() && value.get("text").is_none() {
            let header: Header =
                serde_json::from_value(value).map_err(|e| violation(line_no, e.to_string()))?;
            if let Some(f) = &header.format {
                if f != NATIVE_FORMAT {
                    return Err(violation(line_no, format!("unknown header format {f:?}")));
                }
            }
            if let Some(req) = required {
                if header.schema != req {
                    return Err(CorpusError::SchemaMismatch {
                        expected: req.to_string(),
                        found: header.schema.to_string(),
                    });
                }
            }
            schema = Some(header.schema);
            provenance = header.provenance;
            lines.next();
        }
    }
    let schema = schema.ok_or_else(|| violation(1, "missing header line with `schema`"))?;

    let mut builder = Builder::new(schema);
    for (line_no, line) in lines {
        let value: Value = serde_json::from_str(line).map_err(|e| violation(line_no, e.to_string()))?;
        let doc = if value.get("article").is_some() && value.get("text").is_none() {
            realnews_record(&value, line_no)?
        } else {
            serde_json::from_value::<Doc>(value).map_err(|e| violation(line_no, e.to_string()))?
        };
        builder.push(line_no, doc)?;
    }
    provenance.push(source.to_string());
    builder.finish(provenance)
}

/// RealNews / Grover-style record: `article` body plus article metadata,
/// `label` of `human` or `machine`.
fn realnews_record(value: &Value, line: usize) -> Result<Doc, CorpusError> {
    let str_field = |k: &str| value.get(k).and_then(Value::as_str).map(str::to_string);
    let article = str_field("article").ok_or_else(|| violation(line, "`article` is not a string"))?;
    let label = match str_field("label").as_deref().map(str::to_lowercase).as_deref() {
        Some("human") => Authorship::Human,
        Some("machine") | Some("synthetic") => Authorship::Synthetic,
        other => return Err(violation(line, format!("unknown authorship label {other:?}"))),
    };
    let id = match value.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("line-{line}"),
    };
    let mut doc = Doc::new(id, article, Label::Authorship(label));
    doc.pair_id = str_field("pair_id");
    for (src, dst) in [
        ("title", "headline"),
        ("domain", "domain"),
        ("date", "date"),
        ("publish_date", "date"),
        ("url", "url"),
        ("authors", "authors"),
    ] {
        match value.get(src) {
            Some(Value::String(s)) if !s.is_empty() => {
                doc.meta.insert(dst.to_string(), s.clone());
            }
            Some(Value::Array(items)) => {
                let joined: Vec<&str> = items.iter().filter_map(Value::as_str).collect();
                if !joined.is_empty() {
                    doc.meta.insert(dst.to_string(), joined.join(", "));
                }
            }
            _ => {}
        }
    }
    Ok(doc)
}

fn parse_gne_csv(text: &str, source: &str) -> Result<Corpus, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| violation(1, e.to_string()))?
        .clone();
    let col = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.contains(&h.trim().to_lowercase().as_str()))
    };
    let text_col = col(&["headline", "text"]).ok_or_else(|| violation(1, "missing `headline` column"))?;
    let label_col =
        col(&["dominant_emotion", "label"]).ok_or_else(|| violation(1, "missing `dominant_emotion` column"))?;
    let id_col = col(&["id"]);
    let meta_cols: Vec<(usize, String)> = ["intensity", "url", "date", "source", "domain"]
        .iter()
        .filter_map(|name| col(&[name]).map(|i| (i, name.to_string())))
        .collect();

    let mut builder = Builder::new(Schema::Emotion6);
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(row + 2);
            violation(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row + 2);
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let raw = RawEmotionLabel::parse(SourceScheme::Gne15, field(label_col))
            .map_err(|e| violation(line, e.to_string()))?;
        let label = raw.to_ekman().map_err(|e| violation(line, e.to_string()))?;
        let id = match id_col.map(field) {
            Some(id) if !id.is_empty() => format!("gne-{id}"),
            _ => format!("gne-{row}"),
        };
        let mut doc = Doc::new(id, field(text_col), Label::Emotion(label))
            .with_meta("raw_label", raw.text());
        for (i, name) in &meta_cols {
            if !field(*i).is_empty() {
                doc.meta.insert(name.clone(), field(*i).to_string());
            }
        }
        builder.push(line, doc)?;
    }
    builder.finish(vec![source.to_string(), "gne-15 -> ekman-6 v1".to_string()])
}

fn sibling_gold_file(path: &Path) -> Option<std::path::PathBuf> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".xml").unwrap_or(name);
    Some(path.with_file_name(format!("{stem}.emotions.gold")))
}

/// Parses `<instance id="N">text</instance>` lines. Intensities come from an
/// inline `emotions="a d f j s u"` attribute or from the upstream gold file
/// (`id a d f j s u` per line).
fn parse_affective_text(xml: &str, gold: Option<&str>, source: &str) -> Result<Corpus, CorpusError> {
    let mut gold_scores: BTreeMap<String, [u32; 6]> = BTreeMap::new();
    if let Some(gold) = gold {
        for (i, line) in gold.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.is_empty() {
                continue;
            }
            gold_scores.insert(
                parts[0].to_string(),
                parse_scores(&parts[1..]).map_err(|r| violation(i + 1, format!("gold file: {r}")))?,
            );
        }
    }

    let mut builder = Builder::new(Schema::Emotion6);
    for (i, line) in xml.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if !trimmed.starts_with("<instance") {
            continue;
        }
        let open_end = trimmed.find('>').ok_or_else(|| violation(line_no, "unterminated tag"))?;
        let attrs = &trimmed[..open_end];
        let body = trimmed[open_end + 1..]
            .strip_suffix("</instance>")
            .ok_or_else(|| violation(line_no, "missing </instance>"))?;
        let id = attribute(attrs, "id").ok_or_else(|| violation(line_no, "missing id attribute"))?;
        let scores = match attribute(attrs, "emotions") {
            Some(inline) => {
                let parts: Vec<&str> = inline.split_whitespace().collect();
                parse_scores(&parts).map_err(|r| violation(line_no, r))?
            }
            None => *gold_scores
                .get(id)
                .ok_or_else(|| violation(line_no, format!("no intensities for instance {id}")))?,
        };
        let intensities: BTreeMap<EkmanLabel, u32> =
            EkmanLabel::ALL.iter().copied().zip(scores).collect();
        let label = at_to_single_label(&intensities).map_err(|e| violation(line_no, e.to_string()))?;
        let text = unescape(body);
        let mut doc = Doc::new(format!("at-{id}"), text, Label::Emotion(label));
        for (emotion, score) in &intensities {
            doc.meta.insert(format!("intensity_{emotion}"), score.to_string());
        }
        builder.push(line_no, doc)?;
    }
    builder.finish(vec![source.to_string(), "affective-text argmax v1".to_string()])
}

fn parse_scores(parts: &[&str]) -> Result<[u32; 6], String> {
    if parts.len() != 6 {
        return Err(format!("expected 6 intensities, got {}", parts.len()));
    }
    let mut out = [0u32; 6];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("bad intensity {p:?}"))?;
        if *slot > 100 {
            return Err(format!("intensity {slot} out of 0..100"));
        }
    }
    Ok(out)
}

fn attribute<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let needle = format!("{name}=\"");
    let start = tag.find(&needle)? + needle.len();
    let end = tag[start..].find('"')? + start;
    Some(&tag[start..end])
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn parse_sst2(text: &str, source: &str) -> Result<Corpus, CorpusError> {
    let mut builder = Builder::new(Schema::Sentiment2);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (sentence, label) = line
            .rsplit_once('\t')
            .ok_or_else(|| violation(line_no, "expected `sentence<TAB>label`"))?;
        if line_no == 1 && label.trim() == "label" {
            continue;
        }
        let raw = RawEmotionLabel::parse(SourceScheme::Sst2, label)
            .map_err(|e| violation(line_no, e.to_string()))?;
        let sentiment = raw.to_sentiment().map_err(|e| violation(line_no, e.to_string()))?;
        builder.push(
            line_no,
            Doc::new(format!("sst2-{line_no}"), sentence.trim(), Label::Sentiment(sentiment)),
        )?;
    }
    builder.finish(vec![source.to_string()])
}

/// Serializes a corpus to the native format.
pub fn write_corpus(corpus: &Corpus) -> String {
    let header = Header {
        format: Some(NATIVE_FORMAT.to_string()),
        version: Some(1),
        schema: corpus.schema,
        provenance: corpus.provenance.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for doc in &corpus.docs {
        out.push_str(&serde_json::to_string(doc).expect("doc serializes"));
        out.push('\n');
    }
    out
}

/// Writes the native format via a temporary file and rename.
pub fn write_corpus_file(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(write_corpus(corpus).as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BINARY: &str = r#"{"schema":"binary-authorship","provenance":["unit"]}
{"id":"h1","text":"A human article.","label":"human"}
{"id":"s1","text":"A synthetic article.","label":"synthetic","pair_id":"h1","meta":{"generator_id":"g"}}
{"id":"h2","text":"Another one.","label":"human"}
"#;

    #[test]
    fn three_record_binary_file() {
        let c = parse_corpus(BINARY, CorpusFormat::NewssynthJsonl, "mem").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.schema, Schema::BinaryAuthorship);
        assert_eq!(c.provenance, vec!["unit".to_string(), "mem".to_string()]);
        assert_eq!(c.docs[1].pair_id.as_deref(), Some("h1"));
    }

    #[test]
    fn empty_text_reports_line() {
        let bad = BINARY.replace("Another one.", "");
        match parse_corpus(&bad, CorpusFormat::NewssynthJsonl, "mem") {
            Err(CorpusError::FormatViolation { line, reason }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("empty"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let emo = "{\"schema\":\"emotion-6\"}\n{\"id\":\"a\",\"text\":\"x\",\"label\":\"fear\"}\n";
        assert!(matches!(
            parse_corpus(emo, CorpusFormat::Chatgpt100Jsonl, "mem"),
            Err(CorpusError::SchemaMismatch { .. })
        ));
        let c = parse_corpus(emo, CorpusFormat::CorpusJsonl, "mem").unwrap();
        assert_eq!(c.schema, Schema::Emotion6);
        let mislabeled = "{\"schema\":\"emotion-6\"}\n{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n";
        assert!(matches!(
            parse_corpus(mislabeled, CorpusFormat::CorpusJsonl, "mem"),
            Err(CorpusError::FormatViolation { line: 2, .. })
        ));
    }

    #[test]
    fn realnews_records() {
        let text = r#"{"article":"Body text.","title":"Head","domain":"x.com","authors":["A","B"],"label":"machine","id":7}"#;
        let c = parse_corpus(text, CorpusFormat::NewssynthJsonl, "mem").unwrap();
        let d = &c.docs[0];
        assert_eq!(d.id, "7");
        assert_eq!(d.label, Label::Authorship(Authorship::Synthetic));
        assert_eq!(d.meta["headline"], "Head");
        assert_eq!(d.meta["authors"], "A, B");
    }

    #[test]
    fn gne_csv_maps_labels() {
        let csv = "id,headline,dominant_emotion,intensity\n1,Bad news,guilt,medium\n2,\"Good, news\",pride,high\n";
        let c = parse_corpus(csv, CorpusFormat::GneCsv, "mem").unwrap();
        assert_eq!(c.schema, Schema::Emotion6);
        assert_eq!(c.docs[0].label, Label::Emotion(EkmanLabel::Sadness));
        assert_eq!(c.docs[0].meta["raw_label"], "guilt");
        assert_eq!(c.docs[1].meta["intensity"], "high");
        assert_eq!(c.docs[1].text, "Good, news");
        let bad = "id,headline,dominant_emotion\n1,x,boredom\n";
        assert!(matches!(
            parse_corpus(bad, CorpusFormat::GneCsv, "mem"),
            Err(CorpusError::FormatViolation { line: 2, .. })
        ));
    }

    #[test]
    fn affective_text_inline_and_gold() {
        let xml = "<corpus task=\"affective text\">\n<instance id=\"500\">Test to predict breast cancer relapse is approved</instance>\n<instance id=\"501\" emotions=\"50 0 50 0 0 0\">Two &amp; two</instance>\n</corpus>\n";
        let gold = "500 0 0 15 38 9 11\n";
        let c = parse_affective_text(xml, Some(gold), "mem").unwrap();
        assert_eq!(c.docs[0].id, "at-500");
        assert_eq!(c.docs[0].label, Label::Emotion(EkmanLabel::Happiness));
        assert_eq!(c.docs[1].label, Label::Emotion(EkmanLabel::Anger));
        assert_eq!(c.docs[1].text, "Two & two");
        assert!(parse_affective_text(xml, None, "mem").is_err());
    }

    #[test]
    fn sst2_tsv() {
        let tsv = "sentence\tlabel\nit 's a charming journey \t1\nawful \t0\n";
        let c = parse_corpus(tsv, CorpusFormat::Sst2Tsv, "mem").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.docs[1].label.as_str(), "negative");
        assert!(parse_corpus("x\t7\n", CorpusFormat::Sst2Tsv, "mem").is_err());
    }

    #[test]
    fn native_round_trip_and_missing_file() {
        let c = parse_corpus(BINARY, CorpusFormat::NewssynthJsonl, "mem").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus_file(&c, &path).unwrap();
        let back = load_corpus(&path, CorpusFormat::CorpusJsonl).unwrap();
        assert_eq!(back.docs, c.docs);
        assert_eq!(back.digest(), c.digest());
        assert!(matches!(
            load_corpus(&dir.path().join("nope"), CorpusFormat::CorpusJsonl),
            Err(CorpusError::FileNotFound(_))
        ));
    }

    #[test]
    fn format_tags_round_trip() {
        for f in CorpusFormat::ALL {
            assert_eq!(f.tag().parse::<CorpusFormat>().unwrap(), f);
        }
    }
}
