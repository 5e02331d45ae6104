use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Label, Schema};
use crate::emotaxon::{
    emotion_to_sentiment, randomize_labels, sentiment_to_emotion, EkmanLabel, SurpriseResolver,
};

/// Intermediate-task dataset recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recipe {
    #[serde(rename = "GNE")]
    Gne,
    /// GNE with a seeded permutation of its labels.
    #[serde(rename = "GNEr")]
    GneRandomized,
    #[serde(rename = "AT")]
    At,
    /// GNE + AT.
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "SST-2")]
    Sst2,
    /// GNE + AT + SST-2 mapped onto emotions.
    #[serde(rename = "GAS")]
    Gas,
    /// Two stages: SST-2 sentiment, then GA emotions.
    #[serde(rename = "S-GA")]
    SGa,
    /// GAS mapped onto sentiment.
    #[serde(rename = "GAS+-")]
    GasSentiment,
}

impl Recipe {
    pub const ALL: [Recipe; 8] = [
        Recipe::Gne,
        Recipe::GneRandomized,
        Recipe::At,
        Recipe::Ga,
        Recipe::Sst2,
        Recipe::Gas,
        Recipe::SGa,
        Recipe::GasSentiment,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Recipe::Gne => "GNE",
            Recipe::GneRandomized => "GNEr",
            Recipe::At => "AT",
            Recipe::Ga => "GA",
            Recipe::Sst2 => "SST-2",
            Recipe::Gas => "GAS",
            Recipe::SGa => "S-GA",
            Recipe::GasSentiment => "GAS+-",
        }
    }

    /// Source names the recipe reads.
    pub fn sources(self) -> &'static [&'static str] {
        match self {
            Recipe::Gne | Recipe::GneRandomized => &["gne"],
            Recipe::At => &["at"],
            Recipe::Ga => &["gne", "at"],
            Recipe::Sst2 => &["sst2"],
            Recipe::Gas | Recipe::SGa | Recipe::GasSentiment => &["gne", "at", "sst2"],
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Recipe {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|r| r.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| CorpusError::Unknown {
                kind: "recipe",
                value: s.to_string(),
            })
    }
}

/// Named source corpora: `gne` and `at` (emotion-6), `sst2` (sentiment-2).
pub type AblationSources = BTreeMap<String, Corpus>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AblationOutput {
    Single(Corpus),
    /// Ordered intermediate stages for a chained fine-tune.
    Stages(Vec<Corpus>),
}

impl AblationOutput {
    pub fn stages(&self) -> Vec<&Corpus> {
        match self {
            AblationOutput::Single(c) => vec![c],
            AblationOutput::Stages(cs) => cs.iter().collect(),
        }
    }
}

pub fn compose_ablation(
    recipe: Recipe,
    sources: &AblationSources,
    seed: i64,
    resolver: &dyn SurpriseResolver,
) -> Result<AblationOutput, CorpusError> {
    let get = |name: &str, schema: Schema| -> Result<&Corpus, CorpusError> {
        let c = sources.get(name).ok_or_else(|| CorpusError::MissingSource {
            recipe: recipe.tag().to_string(),
            source_name: name.to_string(),
        })?;
        if c.schema != schema {
            return Err(CorpusError::SchemaMismatch {
                expected: schema.to_string(),
                found: format!("{} for source {name:?}", c.schema),
            });
        }
        Ok(c)
    };
    let note = format!("recipe={} seed={seed}", recipe.tag());
    let tag = |mut c: Corpus| {
        c.provenance.push(note.clone());
        c
    };

    let out = match recipe {
        Recipe::Gne => AblationOutput::Single(tag(get("gne", Schema::Emotion6)?.clone())),
        Recipe::GneRandomized => {
            AblationOutput::Single(tag(randomize_labels(get("gne", Schema::Emotion6)?, seed)?))
        }
        Recipe::At => AblationOutput::Single(tag(get("at", Schema::Emotion6)?.clone())),
        Recipe::Sst2 => AblationOutput::Single(tag(get("sst2", Schema::Sentiment2)?.clone())),
        Recipe::Ga => AblationOutput::Single(ga(&get, &note)?),
        Recipe::Gas => AblationOutput::Single(gas(&get, &note)?),
        Recipe::GasSentiment => {
            let gas = gas(&get, "recipe=GAS")?;
            let mut docs = Vec::with_capacity(gas.len());
            for doc in &gas.docs {
                let Label::Emotion(e) = doc.label else {
                    unreachable!("GAS is emotion-6")
                };
                let resolved = emotion_to_sentiment(e, Some(&doc.text), Some(resolver))?;
                let mut d = doc.clone();
                d.label = Label::Sentiment(resolved.label);
                if let Some(id) = resolved.resolver_id {
                    d.meta.insert("sentiment_resolver".into(), id);
                }
                docs.push(d);
            }
            let mut provenance = gas.provenance.clone();
            provenance.push(format!("emotion_to_sentiment resolver={}", resolver.resolver_id()));
            provenance.push(note.clone());
            AblationOutput::Single(Corpus::new(Schema::Sentiment2, docs, provenance)?)
        }
        Recipe::SGa => {
            let sst = tag(get("sst2", Schema::Sentiment2)?.clone());
            let ga = ga(&get, &note)?;
            AblationOutput::Stages(vec![sst, ga])
        }
    };
    Ok(out)
}

fn ga<'a>(
    get: &dyn Fn(&str, Schema) -> Result<&'a Corpus, CorpusError>,
    note: &str,
) -> Result<Corpus, CorpusError> {
    Corpus::union(&[get("gne", Schema::Emotion6)?, get("at", Schema::Emotion6)?], note)
}

fn gas<'a>(
    get: &dyn Fn(&str, Schema) -> Result<&'a Corpus, CorpusError>,
    note: &str,
) -> Result<Corpus, CorpusError> {
    let sst = get("sst2", Schema::Sentiment2)?;
    let mut mapped = sst.clone();
    mapped.schema = Schema::Emotion6;
    for doc in &mut mapped.docs {
        if let Label::Sentiment(s) = doc.label {
            doc.label = Label::Emotion(sentiment_to_emotion(s));
        }
    }
    mapped.provenance.push("sentiment_to_emotion".into());
    Corpus::union(
        &[get("gne", Schema::Emotion6)?, get("at", Schema::Emotion6)?, &mapped],
        note,
    )
}

/// Single label from AffectiveText-style intensities: the maximum, ties
/// resolved by canonical Ekman order.
pub fn at_to_single_label(intensities: &BTreeMap<EkmanLabel, u32>) -> Result<EkmanLabel, CorpusError> {
    let mut best: Option<(EkmanLabel, u32)> = None;
    for label in EkmanLabel::ALL {
        let score = intensities.get(&label).copied().unwrap_or(0);
        if score > 0 && best.is_none_or(|(_, b)| score > b) {
            best = Some((label, score));
        }
    }
    best.map(|(l, _)| l).ok_or(CorpusError::AllZero)
}
