use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Authorship, Corpus, CorpusError, Label, Schema};
use crate::seed::rng_from_seed;

/// Seeds for the train, validation and test shuffles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTriple {
    pub train: i64,
    pub val: i64,
    pub test: i64,
}

/// `n -> (n, n - 6, n + 6)`.
pub fn derive_data_seeds(base: i64) -> SeedTriple {
    SeedTriple {
        train: base,
        val: base - 6,
        test: base + 6,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitRatios {
    pub fn new(train: u32, val: u32, test: u32) -> Result<Self, CorpusError> {
        if train == 0 || val == 0 || test == 0 {
            return Err(CorpusError::InvalidRatios(format!(
                "{train}:{val}:{test} has a zero part"
            )));
        }
        Ok(Self { train, val, test })
    }

    pub fn total(self) -> u32 {
        self.train + self.val + self.test
    }

    /// Split sizes for `n` items: validation and test get the floor of
    /// their share, train takes the remainder.
    pub fn sizes(self, n: usize) -> (usize, usize, usize) {
        let total = self.total() as usize;
        let val = n * self.val as usize / total;
        let test = n * self.test as usize / total;
        (n - val - test, val, test)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 5,
            val: 1,
            test: 4,
        }
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.val, self.test)
    }
}

impl FromStr for SplitRatios {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(CorpusError::InvalidRatios(s.to_string()));
        }
        let p: Result<Vec<u32>, _> = parts.iter().map(|p| p.trim().parse::<u32>()).collect();
        let p = p.map_err(|_| CorpusError::InvalidRatios(s.to_string()))?;
        Self::new(p[0], p[1], p[2])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSet {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
    pub seeds: SeedTriple,
    pub ratios: SplitRatios,
}

/// Sidecar record sufficient to rebuild a [`SplitSet`] from its source corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub corpus_digest: String,
    pub schema: Schema,
    pub ratios: SplitRatios,
    pub seeds: SeedTriple,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl SplitSet {
    pub fn manifest(&self, source: &Corpus) -> SplitManifest {
        SplitManifest {
            corpus_digest: source.digest(),
            schema: source.schema,
            ratios: self.ratios,
            seeds: self.seeds,
            train_ids: self.train.ids(),
            val_ids: self.val.ids(),
            test_ids: self.test.ids(),
        }
    }

    pub fn from_manifest(source: &Corpus, manifest: &SplitManifest) -> Result<Self, CorpusError> {
        if source.digest() != manifest.corpus_digest {
            return Err(CorpusError::ManifestMismatch("corpus digest differs".into()));
        }
        Ok(Self {
            train: source.select(&manifest.train_ids, &split_note("train", manifest.ratios, manifest.seeds))?,
            val: source.select(&manifest.val_ids, &split_note("val", manifest.ratios, manifest.seeds))?,
            test: source.select(&manifest.test_ids, &split_note("test", manifest.ratios, manifest.seeds))?,
            seeds: manifest.seeds,
            ratios: manifest.ratios,
        })
    }

    pub fn schema(&self) -> Schema {
        self.train.schema
    }
}

fn split_note(name: &str, ratios: SplitRatios, seeds: SeedTriple) -> String {
    format!("split={name} ratios={ratios} seeds=({},{},{})", seeds.train, seeds.val, seeds.test)
}

/// Deterministic three-way split.
///
/// The whole corpus is shuffled with the train seed, then laid out in a
/// class-stratified interleaving: each document gets the key
/// `(rank within its class + 0.5) / class size`, so every contiguous window
/// has class proportions close to the global ones. The interleaving is cut
/// into train, validation and test; train is reshuffled with the train seed
/// and the other two with their own seeds.
pub fn make_seeded_split(
    corpus: &Corpus,
    ratios: SplitRatios,
    seeds: SeedTriple,
) -> Result<SplitSet, CorpusError> {
    let n = corpus.len();
    if n < ratios.total() as usize {
        return Err(CorpusError::TooSmall {
            size: n,
            parts: ratios.total(),
        });
    }
    if corpus.schema == Schema::BinaryAuthorship {
        let human = corpus.count_of(Label::Authorship(Authorship::Human));
        let synthetic = n - human;
        if human != synthetic {
            return Err(CorpusError::UnbalancedInput { human, synthetic });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seeds.train));

    let mut class_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in &order {
        *class_sizes.entry(corpus.docs[i].label.index()).or_insert(0) += 1;
    }
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    let mut keyed: Vec<(f64, usize, usize)> = order
        .iter()
        .map(|&i| {
            let class = corpus.docs[i].label.index();
            let rank = seen.entry(class).or_insert(0);
            let key = (*rank as f64 + 0.5) / class_sizes[&class] as f64;
            *rank += 1;
            (key, class, i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let interleaved: Vec<usize> = keyed.into_iter().map(|(_, _, i)| i).collect();

    let (n_train, n_val, _) = ratios.sizes(n);
    let mut train = interleaved[..n_train].to_vec();
    let mut val = interleaved[n_train..n_train + n_val].to_vec();
    let mut test = interleaved[n_train + n_val..].to_vec();
    train.shuffle(&mut rng_from_seed(seeds.train));
    val.shuffle(&mut rng_from_seed(seeds.val));
    test.shuffle(&mut rng_from_seed(seeds.test));

    let pick = |idx: &[usize], name: &str| {
        let ids: Vec<String> = idx.iter().map(|&i| corpus.docs[i].id.clone()).collect();
        corpus.select(
            &ids,
            &split_note(name, ratios, seeds),
        )
    };
    let set = SplitSet {
        train: pick(&train, "train")?,
        val: pick(&val, "val")?,
        test: pick(&test, "test")?,
        seeds,
        ratios,
    };
    debug_assert_eq!(
        set.train.len() + set.val.len() + set.test.len(),
        n,
        "splits must partition the corpus"
    );
    debug_assert!({
        let mut all = HashSet::new();
        [&set.train, &set.val, &set.test]
            .iter()
            .flat_map(|c| c.docs.iter())
            .all(|d| all.insert(d.id.clone()))
    });
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpora::Doc;
    use crate::emotaxon::EkmanLabel;
    use proptest::prelude::*;

    fn binary(n_per_class: usize) -> Corpus {
        let mut docs = Vec::new();
        for i in 0..n_per_class {
            docs.push(Doc::new(format!("h{i}"), format!("human {i}"), Label::Authorship(Authorship::Human)));
            docs.push(
                Doc::new(format!("s{i}"), format!("synthetic {i}"), Label::Authorship(Authorship::Synthetic))
                    .with_pair(format!("h{i}")),
            );
        }
        Corpus::new(Schema::BinaryAuthorship, docs, vec!["unit".into()]).unwrap()
    }

    fn balance(c: &Corpus) -> (usize, usize) {
        let h = c.count_of(Label::Authorship(Authorship::Human));
        (h, c.len() - h)
    }

    #[test]
    fn seed_derivation() {
        assert_eq!(derive_data_seeds(17), SeedTriple { train: 17, val: 11, test: 23 });
        assert_eq!(derive_data_seeds(38), SeedTriple { train: 38, val: 32, test: 44 });
        assert_eq!(derive_data_seeds(5), SeedTriple { train: 5, val: -1, test: 11 });
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("5:1:4".parse::<SplitRatios>().unwrap(), SplitRatios::default());
        assert!("5:0:4".parse::<SplitRatios>().is_err());
        assert!("5:1".parse::<SplitRatios>().is_err());
        assert_eq!(SplitRatios::default().sizes(10), (5, 1, 4));
        assert_eq!(SplitRatios::default().sizes(20), (10, 2, 8));
        assert_eq!(SplitRatios::default().sizes(13), (7, 1, 5));
    }

    #[test]
    fn twenty_docs_split_evenly() {
        let c = binary(10);
        let s = make_seeded_split(&c, SplitRatios::default(), derive_data_seeds(17)).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (10, 2, 8));
        assert_eq!(balance(&s.train), (5, 5));
        assert_eq!(balance(&s.val), (1, 1));
        assert_eq!(balance(&s.test), (4, 4));
        let again = make_seeded_split(&c, SplitRatios::default(), derive_data_seeds(17)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn ten_docs() {
        let c = binary(5);
        let s = make_seeded_split(&c, SplitRatios::default(), derive_data_seeds(38)).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (5, 1, 4));
    }

    #[test]
    fn rejects_small_and_unbalanced() {
        let c = binary(4);
        assert!(matches!(
            make_seeded_split(&c, SplitRatios::default(), derive_data_seeds(1)),
            Err(CorpusError::TooSmall { .. })
        ));
        let mut c = binary(10);
        c.docs.pop();
        assert!(matches!(
            make_seeded_split(&c, SplitRatios::default(), derive_data_seeds(1)),
            Err(CorpusError::UnbalancedInput { human: 10, synthetic: 9 })
        ));
    }

    #[test]
    fn manifest_rebuilds_exactly() {
        let c = binary(30);
        let s = make_seeded_split(&c, SplitRatios::default(), derive_data_seeds(91)).unwrap();
        let m = s.manifest(&c);
        let json = serde_json::to_string(&m).unwrap();
        let back: SplitManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(SplitSet::from_manifest(&c, &back).unwrap(), s);
        let mut other = c.clone();
        other.docs[0].text.push('x');
        assert!(SplitSet::from_manifest(&other, &back).is_err());
    }

    #[test]
    fn multiclass_is_stratified() {
        let mut docs = Vec::new();
        for i in 0..120 {
            let label = if i % 4 == 0 { EkmanLabel::Fear } else { EkmanLabel::Anger };
            docs.push(Doc::new(format!("d{i}"), "t", Label::Emotion(label)));
        }
        let c = Corpus::new(Schema::Emotion6, docs, vec!["u".into()]).unwrap();
        let s = make_seeded_split(&c, SplitRatios::default(), derive_data_seeds(5)).unwrap();
        let fear = |c: &Corpus| c.count_of(Label::Emotion(EkmanLabel::Fear));
        assert_eq!(fear(&s.train) + fear(&s.val) + fear(&s.test), 30);
        assert!((fear(&s.test) as i64 - 12).abs() <= 1);
        assert!((fear(&s.val) as i64 - 3).abs() <= 1);
    }

    proptest! {
        #[test]
        fn partition_and_balance(n in 5usize..80, base in -100i64..100, t in 1u32..8, v in 1u32..4, te in 1u32..6) {
            let c = binary(n);
            let ratios = SplitRatios::new(t, v, te).unwrap();
            prop_assume!(c.len() >= ratios.total() as usize);
            let s = make_seeded_split(&c, ratios, derive_data_seeds(base)).unwrap();
            let mut ids: Vec<String> = [&s.train, &s.val, &s.test].iter().flat_map(|c| c.ids()).collect();
            ids.sort();
            let mut expected = c.ids();
            expected.sort();
            prop_assert_eq!(ids, expected);
            for part in [&s.train, &s.val, &s.test] {
                let (h, sy) = balance(part);
                prop_assert!((h as i64 - sy as i64).abs() <= 1);
            }
            let (a, b, cc) = ratios.sizes(c.len());
            prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), (a, b, cc));
        }
    }
}
