//! The URL-sharing intent taxonomy: six top-level categories, 26 intention
//! classes, and mappings from earlier tweet-intent taxonomies.
//!
//! The taxonomy is data. It is loaded from a TOML file (see
//! `data/taxonomy.toml`) and validated against the structural invariants
//! below before anything else can use it:
//!
//! - exactly six categories, drawn from the closed set of [`CategoryId`]s,
//!   each appearing once;
//! - exactly 26 classes, with per-category counts 8/2/4/4/4/4;
//! - class ids are unique slugs prefixed by their parent's lowercase id.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of classes each category must carry, in canonical category order.
pub const EXPECTED_CLASS_COUNTS: [(CategoryId, usize); 6] = [
    (CategoryId::Share, 8),
    (CategoryId::Entertain, 2),
    (CategoryId::Offer, 4),
    (CategoryId::Converse, 4),
    (CategoryId::Promote, 4),
    (CategoryId::Request, 4),
];

pub const EXPECTED_CLASS_TOTAL: usize = 26;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("unknown prior taxonomy source {0:?}")]
    UnknownSource(String),
    #[error("no mapping for {source_name} label {label:?}")]
    UnknownSourceLabel {
        source_name: PriorSource,
        label: String,
    },
}

/// Top-level intent category. The set is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoryId {
    Share,
    Entertain,
    Offer,
    Converse,
    Promote,
    Request,
}

impl CategoryId {
    pub const ALL: [CategoryId; 6] = [
        CategoryId::Share,
        CategoryId::Entertain,
        CategoryId::Offer,
        CategoryId::Converse,
        CategoryId::Promote,
        CategoryId::Request,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryId::Share => "Share",
            CategoryId::Entertain => "Entertain",
            CategoryId::Offer => "Offer",
            CategoryId::Converse => "Converse",
            CategoryId::Promote => "Promote",
            CategoryId::Request => "Request",
        }
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for CategoryId {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        CategoryId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TaxonomyError::UnknownLabel(s.to_string()))
    }
}

/// Stable class slug such as `share.political_news`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub String);

impl ClassId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentClass {
    pub id: ClassId,
    pub name: String,
    pub illustrative_example: String,
    pub parent: CategoryId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentCategory {
    pub id: CategoryId,
    pub name: String,
    pub definition: String,
    pub classes: Vec<IntentClass>,
}

impl IntentCategory {
    /// Display form used in reports and intent augmentation,
    /// e.g. `Information Sharing (Share)`.
    pub fn display_name(&self) -> String {
        format!("{} ({})", self.name, self.id)
    }
}

/// A label an annotator (or a label file) can assign to an item.
///
/// `Uncertain` is the annotator escape hatch; it is not a taxonomy member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntentLabel {
    Category(CategoryId),
    Class {
        category: CategoryId,
        class: ClassId,
    },
    Uncertain,
}

impl IntentLabel {
    /// Top-level category of the label, `None` for `Uncertain`.
    pub fn category(&self) -> Option<CategoryId> {
        match self {
            IntentLabel::Category(c) => Some(*c),
            IntentLabel::Class { category, .. } => Some(*category),
            IntentLabel::Uncertain => None,
        }
    }

    pub fn is_uncertain(&self) -> bool {
        matches!(self, IntentLabel::Uncertain)
    }

    /// Collapses a class label onto its parent category.
    pub fn to_category_level(&self) -> IntentLabel {
        match self {
            IntentLabel::Class { category, .. } => IntentLabel::Category(*category),
            other => other.clone(),
        }
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntentLabel::Category(c) => write!(f, "{c}"),
            IntentLabel::Class { class, .. } => write!(f, "{class}"),
            IntentLabel::Uncertain => f.write_str("uncertain"),
        }
    }
}

/// Earlier tweet-intent taxonomies that the categories are mapped against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PriorSource {
    Alhadi2011,
    GomezAdorno2014,
    Java2007,
}

impl PriorSource {
    pub const ALL: [PriorSource; 3] = [
        PriorSource::Alhadi2011,
        PriorSource::GomezAdorno2014,
        PriorSource::Java2007,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PriorSource::Alhadi2011 => "alhadi2011",
            PriorSource::GomezAdorno2014 => "gomezadorno2014",
            PriorSource::Java2007 => "java2007",
        }
    }
}

impl fmt::Display for PriorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PriorSource {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        PriorSource::ALL
            .into_iter()
            .find(|p| p.as_str() == key)
            .ok_or_else(|| TaxonomyError::UnknownSource(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorMapping {
    pub source: PriorSource,
    pub source_label: String,
    pub target_category: CategoryId,
}

// On-disk form. Classes are flat and point at their parent so that a
// dangling parent is representable (and rejected).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    version: String,
    category: Vec<CategoryRecord>,
    #[serde(default)]
    class: Vec<ClassRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoryRecord {
    id: String,
    name: String,
    definition: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassRecord {
    id: String,
    parent: String,
    name: String,
    example: String,
}

/// A validated taxonomy. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub version: String,
    categories: Vec<IntentCategory>,
}

impl Taxonomy {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TaxonomyError> {
        if text.trim().is_empty() {
            return Err(TaxonomyError::Parse("taxonomy file is empty".into()));
        }
        let file: TaxonomyFile =
            toml::from_str(text).map_err(|e| TaxonomyError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    fn from_file(file: TaxonomyFile) -> Result<Self, TaxonomyError> {
        let invalid = |msg: String| Err(TaxonomyError::Validation(msg));

        let mut categories: Vec<IntentCategory> = Vec::with_capacity(file.category.len());
        for rec in file.category {
            let id: CategoryId = match rec.id.parse() {
                Ok(id) => id,
                Err(_) => return invalid(format!("unknown category id {:?}", rec.id)),
            };
            if id.as_str() != rec.id {
                return invalid(format!("category id {:?} must be spelled {id}", rec.id));
            }
            if categories.iter().any(|c| c.id == id) {
                return invalid(format!("duplicate category id {id}"));
            }
            if rec.name.trim().is_empty() {
                return invalid(format!("category {id} has an empty name"));
            }
            categories.push(IntentCategory {
                id,
                name: rec.name,
                definition: rec.definition,
                classes: Vec::new(),
            });
        }
        if categories.len() != CategoryId::ALL.len() {
            return invalid(format!(
                "expected {} categories, found {}",
                CategoryId::ALL.len(),
                categories.len()
            ));
        }

        let mut seen = HashSet::new();
        for rec in file.class {
            let parent = match categories.iter().position(|c| c.id.as_str() == rec.parent) {
                Some(i) => i,
                None => {
                    return invalid(format!(
                        "class {:?} has dangling parent {:?}",
                        rec.id, rec.parent
                    ))
                }
            };
            let parent_id = categories[parent].id;
            if !is_valid_slug(&rec.id) {
                return invalid(format!("class id {:?} is not a lowercase slug", rec.id));
            }
            let prefix = format!("{}.", parent_id.as_str().to_ascii_lowercase());
            if !rec.id.starts_with(&prefix) {
                return invalid(format!("class id {:?} must start with {prefix:?}", rec.id));
            }
            if !seen.insert(rec.id.clone()) {
                return invalid(format!("duplicate class id {:?}", rec.id));
            }
            if rec.name.trim().is_empty() {
                return invalid(format!("class {:?} has an empty name", rec.id));
            }
            categories[parent].classes.push(IntentClass {
                id: ClassId(rec.id),
                name: rec.name,
                illustrative_example: rec.example,
                parent: parent_id,
            });
        }

        let total: usize = categories.iter().map(|c| c.classes.len()).sum();
        if total != EXPECTED_CLASS_TOTAL {
            return invalid(format!(
                "expected {EXPECTED_CLASS_TOTAL} classes, found {total}"
            ));
        }
        for (id, expected) in EXPECTED_CLASS_COUNTS {
            let found = categories
                .iter()
                .find(|c| c.id == id)
                .map(|c| c.classes.len())
                .unwrap_or(0);
            if found != expected {
                return invalid(format!(
                    "category {id} must have {expected} classes, found {found}"
                ));
            }
        }

        // Names must be unambiguous for label resolution.
        let mut names = HashSet::new();
        for c in &categories {
            for n in std::iter::once(&c.name).chain(c.classes.iter().map(|k| &k.name)) {
                if !names.insert(normalize_key(n)) {
                    return invalid(format!("duplicate display name {n:?}"));
                }
            }
        }

        Ok(Taxonomy {
            version: file.version,
            categories,
        })
    }

    /// Serializes back to the canonical TOML form.
    pub fn to_toml_string(&self) -> String {
        let file = TaxonomyFile {
            version: self.version.clone(),
            category: self
                .categories
                .iter()
                .map(|c| CategoryRecord {
                    id: c.id.to_string(),
                    name: c.name.clone(),
                    definition: c.definition.clone(),
                })
                .collect(),
            class: self
                .classes()
                .map(|k| ClassRecord {
                    id: k.id.0.clone(),
                    parent: k.parent.to_string(),
                    name: k.name.clone(),
                    example: k.illustrative_example.clone(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("taxonomy serializes")
    }

    pub fn categories(&self) -> &[IntentCategory] {
        &self.categories
    }

    pub fn category(&self, id: CategoryId) -> &IntentCategory {
        self.categories
            .iter()
            .find(|c| c.id == id)
            .expect("validated taxonomy contains every category")
    }

    pub fn classes(&self) -> impl Iterator<Item = &IntentClass> {
        self.categories.iter().flat_map(|c| c.classes.iter())
    }

    pub fn class(&self, id: &str) -> Option<&IntentClass> {
        self.classes().find(|k| k.id.0 == id)
    }

    pub fn class_count(&self) -> usize {
        self.categories.iter().map(|c| c.classes.len()).sum()
    }

    /// Resolves free text to a label. Matching is case-insensitive and
    /// whitespace-normalized against category ids, category names,
    /// category display names, class ids, and class names.
    pub fn resolve_label(&self, text: &str) -> Result<IntentLabel, TaxonomyError> {
        let key = normalize_key(text);
        if key == "uncertain" {
            return Ok(IntentLabel::Uncertain);
        }
        for c in &self.categories {
            if key == normalize_key(c.id.as_str())
                || key == normalize_key(&c.name)
                || key == normalize_key(&c.display_name())
            {
                return Ok(IntentLabel::Category(c.id));
            }
        }
        for k in self.classes() {
            if key == normalize_key(&k.id.0) || key == normalize_key(&k.name) {
                return Ok(IntentLabel::Class {
                    category: k.parent,
                    class: k.id.clone(),
                });
            }
        }
        Err(TaxonomyError::UnknownLabel(text.trim().to_string()))
    }

    /// Checks that a label refers to this taxonomy.
    pub fn contains_label(&self, label: &IntentLabel) -> bool {
        match label {
            IntentLabel::Uncertain | IntentLabel::Category(_) => true,
            IntentLabel::Class { category, class } => self
                .class(class.as_str())
                .is_some_and(|k| k.parent == *category),
        }
    }

    /// Text appended to queries and documents for intent augmentation.
    /// `None` for `Uncertain`.
    pub fn augmentation_text(&self, label: &IntentLabel) -> Option<String> {
        match label {
            IntentLabel::Uncertain => None,
            IntentLabel::Category(c) => Some(self.category(*c).display_name()),
            IntentLabel::Class { category, class } => {
                let cat = self.category(*category).display_name();
                match self.class(class.as_str()) {
                    Some(k) => Some(format!("{cat} {}", k.name)),
                    None => Some(cat),
                }
            }
        }
    }
}

fn is_valid_slug(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
}

fn normalize_key(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Mapping table from earlier taxonomies onto the six categories, kept in
/// file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriorMappings {
    rows: Vec<PriorMapping>,
}

impl PriorMappings {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses tab-separated `source, source_label, target_category` rows. A
    /// header row starting with `source` and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut rows: Vec<PriorMapping> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if line_no == 1 && cols.first() == Some(&"source") {
                continue;
            }
            if cols.len() != 3 {
                return Err(TaxonomyError::Parse(format!(
                    "line {line_no}: expected 3 tab-separated columns, found {}",
                    cols.len()
                )));
            }
            let source: PriorSource = cols[0]
                .parse()
                .map_err(|e| TaxonomyError::Parse(format!("line {line_no}: {e}")))?;
            let target: CategoryId = cols[2].parse().map_err(|_| {
                TaxonomyError::Validation(format!(
                    "line {line_no}: mapping targets unknown category {:?}",
                    cols[2]
                ))
            })?;
            if cols[1].is_empty() {
                return Err(TaxonomyError::Parse(format!(
                    "line {line_no}: empty source label"
                )));
            }
            let row = PriorMapping {
                source,
                source_label: cols[1].to_string(),
                target_category: target,
            };
            if rows.contains(&row) {
                return Err(TaxonomyError::Validation(format!(
                    "line {line_no}: duplicate mapping row"
                )));
            }
            rows.push(row);
        }
        Ok(PriorMappings { rows })
    }

    pub fn rows(&self) -> &[PriorMapping] {
        &self.rows
    }

    /// All target categories for a source label, in table order.
    pub fn map_prior(
        &self,
        source: PriorSource,
        source_label: &str,
    ) -> Result<Vec<CategoryId>, TaxonomyError> {
        let key = normalize_key(source_label);
        let targets: Vec<CategoryId> = self
            .rows
            .iter()
            .filter(|r| r.source == source && normalize_key(&r.source_label) == key)
            .map(|r| r.target_category)
            .collect();
        if targets.is_empty() {
            return Err(TaxonomyError::UnknownSourceLabel {
                source_name: source,
                label: source_label.to_string(),
            });
        }
        Ok(targets)
    }

    /// Source labels grouped by target category, for side-by-side reports.
    pub fn by_category(&self) -> BTreeMap<CategoryId, Vec<&PriorMapping>> {
        let mut out: BTreeMap<CategoryId, Vec<&PriorMapping>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.target_category).or_default().push(r);
        }
        out
    }
}
