//! Synthetic tagged-photo corpus with matching visual features.
//!
//! Every concept has a name word, a private vocabulary and a binary mask
//! over a shared pool of attribute words. Honest pieces tag the name, some
//! private words and a few of the concept's true attributes. Each user also
//! has a fixed signature of shared words; bulk users tag their signature
//! instead of the true attributes and repeat every piece `bulk_factor`
//! times verbatim. Visual features are a random linear image of the
//! attribute mask plus Gaussian noise, so a prototype that captures the
//! attribute words supports zero-shot transfer.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{read_metadata, ConceptCollection, StopWords, DEFAULT_PIECE_CAP};
use crate::error::{Error, Result};
use crate::matrix_io::{save_lines, save_matrix};
use crate::prototypes::{write_class_names, ClassNameEntry, PrototypeSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub concepts: usize,
    pub users: usize,
    pub pieces_per_concept: usize,
    pub vocab_per_concept: usize,
    pub shared_vocab: usize,
    pub attributes_per_concept: usize,
    pub bulk_users_fraction: f64,
    pub bulk_factor: usize,
    /// Concepts with visual training samples; the rest are unseen.
    pub seen: usize,
    /// Intermediate taxonomy nodes; each owns one attribute all its
    /// concepts share.
    pub groups: usize,
    pub visual_dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            concepts: 20,
            users: 200,
            pieces_per_concept: 120,
            vocab_per_concept: 6,
            shared_vocab: 24,
            attributes_per_concept: 5,
            bulk_users_fraction: 0.0,
            bulk_factor: 1,
            seen: 10,
            groups: 5,
            visual_dim: 32,
            train_per_class: 20,
            test_per_class: 20,
            noise: 0.5,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("concepts", self.concepts),
            ("users", self.users),
            ("pieces_per_concept", self.pieces_per_concept),
            ("vocab_per_concept", self.vocab_per_concept),
            ("shared_vocab", self.shared_vocab),
            ("attributes_per_concept", self.attributes_per_concept),
            ("bulk_factor", self.bulk_factor),
            ("groups", self.groups),
            ("visual_dim", self.visual_dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if !(0.0..=1.0).contains(&self.bulk_users_fraction) {
            return Err(Error::invalid("bulk_users_fraction must be in [0, 1]"));
        }
        if self.seen == 0 || self.seen >= self.concepts {
            return Err(Error::invalid("need 1 <= seen < concepts"));
        }
        if self.groups > self.shared_vocab || self.attributes_per_concept > self.shared_vocab {
            return Err(Error::invalid("shared_vocab must cover the groups and per-concept attributes"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid("noise must be non-negative"));
        }
        Ok(())
    }
}

/// One metadata line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub concept: String,
    pub user: String,
    pub title: String,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub records: Vec<SynthRecord>,
    /// Users whose pieces are repeated.
    pub bulk_users: Vec<String>,
    /// Concept id to its name word, private words and true attribute words.
    pub clusters: BTreeMap<String, Vec<String>>,
    pub class_names: Vec<ClassNameEntry>,
    /// Binary attribute mask of every concept, C x shared_vocab.
    pub attributes: PrototypeSet,
    pub seen: Vec<String>,
    pub unseen: Vec<String>,
    pub taxonomy: Vec<(String, String)>,
    pub train_features: DMatrix<f64>,
    pub train_labels: Vec<String>,
    pub test_features: DMatrix<f64>,
    pub test_labels: Vec<String>,
}

pub fn concept_id(c: usize) -> String {
    format!("c{c:03}")
}

fn name_word(c: usize) -> String {
    format!("concept{c:03}")
}

fn private_word(c: usize, k: usize) -> String {
    format!("c{c:03}w{k:02}")
}

fn attribute_word(a: usize) -> String {
    format!("attr{a:02}")
}

fn user_id(u: usize) -> String {
    format!("u{u:05}")
}

fn distinct(rng: &mut ChaCha8Rng, pool: &[usize], n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = pool.choose_multiple(rng, n.min(pool.len())).copied().collect();
    v.sort_unstable();
    v
}

pub fn synth_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let cfg = config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let all_attrs: Vec<usize> = (0..cfg.shared_vocab).collect();

    // attribute masks: the group attribute plus random others
    let mut masks = DMatrix::<f64>::zeros(cfg.concepts, cfg.shared_vocab);
    let mut concept_attrs = Vec::with_capacity(cfg.concepts);
    for c in 0..cfg.concepts {
        let g = c % cfg.groups;
        let others: Vec<usize> = all_attrs.iter().copied().filter(|&a| a != g).collect();
        let mut attrs = distinct(&mut rng, &others, cfg.attributes_per_concept - 1);
        attrs.push(g);
        attrs.sort_unstable();
        for &a in &attrs {
            masks[(c, a)] = 1.0;
        }
        concept_attrs.push(attrs);
    }

    let signatures: Vec<Vec<usize>> = (0..cfg.users)
        .map(|_| {
            let n = rng.random_range(2..=3);
            distinct(&mut rng, &all_attrs, n)
        })
        .collect();
    let mut shuffled: Vec<usize> = (0..cfg.users).collect();
    shuffled.shuffle(&mut rng);
    let n_bulk = (cfg.bulk_users_fraction * cfg.users as f64).round() as usize;
    let mut is_bulk = vec![false; cfg.users];
    for &u in &shuffled[..n_bulk] {
        is_bulk[u] = true;
    }

    let fillers = ["the", "a", "of", "my", "at"];
    let mut records = Vec::new();
    for (c, attrs) in concept_attrs.iter().enumerate() {
        let mut users: Vec<usize> = (0..cfg.users).collect();
        users.shuffle(&mut rng);
        for j in 0..cfg.pieces_per_concept {
            let u = users[j % cfg.users];
            let private: Vec<usize> = (0..cfg.vocab_per_concept).collect();
            let pw = distinct(&mut rng, &private, 2);
            let mut title = vec![name_word(c)];
            if rng.random_bool(0.5) {
                title.insert(0, fillers.choose(&mut rng).copied().unwrap_or("the").to_owned());
            }
            title.extend(pw.iter().map(|&k| private_word(c, k)));
            let tag_attrs = if is_bulk[u] {
                signatures[u].clone()
            } else {
                distinct(&mut rng, attrs, 3)
            };
            let mut tags: Vec<String> = tag_attrs.iter().map(|&a| attribute_word(a)).collect();
            tags.push(name_word(c));
            let record = SynthRecord {
                concept: concept_id(c),
                user: user_id(u),
                title: title.join(" "),
                tags,
            };
            let copies = if is_bulk[u] { cfg.bulk_factor } else { 1 };
            for _ in 0..copies {
                records.push(record.clone());
            }
        }
    }

    let ids: Vec<String> = (0..cfg.concepts).map(concept_id).collect();
    let clusters = concept_attrs
        .iter()
        .enumerate()
        .map(|(c, attrs)| {
            let mut words = vec![name_word(c)];
            words.extend((0..cfg.vocab_per_concept).map(|k| private_word(c, k)));
            words.extend(attrs.iter().map(|&a| attribute_word(a)));
            (concept_id(c), words)
        })
        .collect();
    let class_names = (0..cfg.concepts)
        .map(|c| ClassNameEntry {
            class_id: concept_id(c),
            variants: vec![name_word(c)],
        })
        .collect();
    let mut attributes = PrototypeSet::new(ids.clone(), masks.clone())?;
    attributes.normalized = false;

    let mut order = ids.clone();
    order.shuffle(&mut rng);
    let mut seen = order[..cfg.seen].to_vec();
    let mut unseen = order[cfg.seen..].to_vec();
    seen.sort();
    unseen.sort();

    let mut taxonomy: Vec<(String, String)> = (0..cfg.groups).map(|g| (format!("group{g:02}"), "root".to_owned())).collect();
    taxonomy.extend((0..cfg.concepts).map(|c| (concept_id(c), format!("group{:02}", c % cfg.groups))));

    let lift = DMatrix::<f64>::from_fn(cfg.shared_vocab, cfg.visual_dim, |_, _| StandardNormal.sample(&mut rng));
    let mut sample = |classes: &[String], per: usize| {
        let mut rows = Vec::with_capacity(classes.len() * per);
        let mut labels = Vec::with_capacity(classes.len() * per);
        for id in classes {
            let c = ids.iter().position(|x| x == id).unwrap_or(0);
            for _ in 0..per {
                let noise = DMatrix::<f64>::from_fn(1, cfg.visual_dim, |_, _| StandardNormal.sample(&mut rng));
                rows.push(masks.row(c) * &lift + noise * cfg.noise);
                labels.push(id.clone());
            }
        }
        let m = if rows.is_empty() {
            DMatrix::zeros(0, cfg.visual_dim)
        } else {
            DMatrix::from_rows(&rows)
        };
        (m, labels)
    };
    let (train_features, train_labels) = sample(&seen, cfg.train_per_class);
    let (test_features, test_labels) = sample(&unseen, cfg.test_per_class);

    Ok(SynthCorpus {
        config: cfg.clone(),
        records,
        bulk_users: (0..cfg.users).filter(|&u| is_bulk[u]).map(user_id).collect(),
        clusters,
        class_names,
        attributes,
        seen,
        unseen,
        taxonomy,
        train_features,
        train_labels,
        test_features,
        test_labels,
    })
}

/// File names written by [`SynthCorpus::write_dir`].
pub const SYNTH_FILES: [&str; 11] = [
    "metadata.jsonl",
    "clusters.tsv",
    "class_names.tsv",
    "attributes.txt",
    "seen.txt",
    "unseen.txt",
    "taxonomy.tsv",
    "train_features.txt",
    "train_labels.txt",
    "test_features.txt",
    "test_labels.txt",
];

impl SynthCorpus {
    pub fn write_metadata<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| Error::invalid(format!("metadata: {e}")))?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Tokenized collections, as ingestion would produce them.
    pub fn collections(&self, stopwords: &StopWords) -> Result<Vec<ConceptCollection>> {
        let mut buf = Vec::new();
        self.write_metadata(&mut buf)?;
        Ok(read_metadata(&buf[..], DEFAULT_PIECE_CAP, stopwords)?.collections)
    }

    /// Writes every artifact into `dir` and returns the paths.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = |name: &str| dir.join(name);
        let create = |p: &Path| fs::File::create(p).map_err(|e| Error::io(p, e));

        self.write_metadata(create(&path("metadata.jsonl"))?)?;
        let clusters: Vec<String> = self
            .clusters
            .iter()
            .map(|(c, words)| format!("{c}\t{}", words.join(" ")))
            .collect();
        save_lines(&clusters, path("clusters.tsv"))?;
        write_class_names(&self.class_names, BufWriter::new(create(&path("class_names.tsv"))?))?;
        self.attributes.save(path("attributes.txt"))?;
        save_lines(&self.seen, path("seen.txt"))?;
        save_lines(&self.unseen, path("unseen.txt"))?;
        let tax: Vec<String> = self.taxonomy.iter().map(|(c, p)| format!("{c}\t{p}")).collect();
        save_lines(&tax, path("taxonomy.tsv"))?;
        save_matrix(&self.train_features, path("train_features.txt"))?;
        save_lines(&self.train_labels, path("train_labels.txt"))?;
        save_matrix(&self.test_features, path("test_features.txt"))?;
        save_lines(&self.test_labels, path("test_labels.txt"))?;
        Ok(SYNTH_FILES.iter().map(|f| path(f)).collect())
    }
}
