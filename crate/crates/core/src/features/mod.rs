//! Static feature extraction from APK manifests and JSON Lines dumps.

pub mod apk;
pub mod axml;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use axml::{parse_axml, Attribute, AxmlError, Element, ManifestDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    Permission,
    Service,
    Receiver,
    IntentAction,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 4] = [
        FeatureCategory::Permission,
        FeatureCategory::Service,
        FeatureCategory::Receiver,
        FeatureCategory::IntentAction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Permission => "permission",
            FeatureCategory::Service => "service",
            FeatureCategory::Receiver => "receiver",
            FeatureCategory::IntentAction => "intent_action",
        }
    }

    /// Heading used when rendering feature blocks into prompts.
    pub fn heading(self) -> &'static str {
        match self {
            FeatureCategory::Permission => "Permissions",
            FeatureCategory::Service => "Services",
            FeatureCategory::Receiver => "Broadcast Receivers",
            FeatureCategory::IntentAction => "Intent Actions",
        }
    }

    /// Corpus file stem for this category.
    pub fn file_stem(self) -> &'static str {
        match self {
            FeatureCategory::Permission => "permissions",
            FeatureCategory::Service => "services",
            FeatureCategory::Receiver => "receivers",
            FeatureCategory::IntentAction => "intent_actions",
        }
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown feature category `{s}`"))
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("feature is empty after normalization")]
pub struct EmptyAfterNormalization;

const QUOTES: [char; 3] = ['"', '\'', '`'];

/// Canonical form of a raw feature identifier: all whitespace removed,
/// surrounding quote characters stripped, case preserved.
pub fn normalize_feature(raw: &str) -> Result<String, EmptyAfterNormalization> {
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let trimmed = compact.trim_matches(QUOTES.as_slice());
    if trimmed.is_empty() {
        Err(EmptyAfterNormalization)
    } else {
        Ok(trimmed.to_owned())
    }
}

/// Case-folded lookup key for a canonical name.
pub fn fold(name: &str) -> String {
    name.to_lowercase()
}

/// The four feature lists of one APK, in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StaticFeatureSet {
    pub apk_id: String,
    #[serde(default)]
    pub permissions: IndexSet<String>,
    #[serde(default)]
    pub services: IndexSet<String>,
    #[serde(default)]
    pub receivers: IndexSet<String>,
    #[serde(default)]
    pub intent_actions: IndexSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub total_permissions: usize,
    pub total_services: usize,
    pub total_receivers: usize,
    pub total_intents: usize,
}

impl StaticFeatureSet {
    pub fn new(apk_id: impl Into<String>) -> Self {
        Self {
            apk_id: apk_id.into(),
            ..Default::default()
        }
    }

    pub fn get(&self, category: FeatureCategory) -> &IndexSet<String> {
        match category {
            FeatureCategory::Permission => &self.permissions,
            FeatureCategory::Service => &self.services,
            FeatureCategory::Receiver => &self.receivers,
            FeatureCategory::IntentAction => &self.intent_actions,
        }
    }

    fn get_mut(&mut self, category: FeatureCategory) -> &mut IndexSet<String> {
        match category {
            FeatureCategory::Permission => &mut self.permissions,
            FeatureCategory::Service => &mut self.services,
            FeatureCategory::Receiver => &mut self.receivers,
            FeatureCategory::IntentAction => &mut self.intent_actions,
        }
    }

    /// Normalize and insert; empty values are dropped.
    pub fn insert(&mut self, category: FeatureCategory, raw: &str) -> bool {
        match normalize_feature(raw) {
            Ok(v) => self.get_mut(category).insert(v),
            Err(_) => false,
        }
    }

    pub fn stats(&self) -> FeatureStats {
        FeatureStats {
            total_permissions: self.permissions.len(),
            total_services: self.services.len(),
            total_receivers: self.receivers.len(),
            total_intents: self.intent_actions.len(),
        }
    }

    /// All features as (category, name), categories in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (FeatureCategory, &str)> {
        FeatureCategory::ALL
            .into_iter()
            .flat_map(move |c| self.get(c).iter().map(move |n| (c, n.as_str())))
    }

    pub fn len(&self) -> usize {
        FeatureCategory::ALL.iter().map(|c| self.get(*c).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Re-normalize every element, dropping empties and duplicates.
    pub fn normalized(self) -> Self {
        let mut out = StaticFeatureSet::new(self.apk_id.trim());
        for (c, n) in self.iter() {
            out.insert(c, n);
        }
        out
    }
}

/// Collect the four categories from a decoded manifest.
///
/// Intent actions are taken only from intent-filters nested directly in
/// `receiver` or `service` elements.
pub fn extract_features(manifest: &ManifestDocument, apk_id: &str) -> StaticFeatureSet {
    let mut set = StaticFeatureSet::new(apk_id);
    visit(&manifest.root, None, &mut set);
    set
}

fn visit(el: &Element, component: Option<FeatureCategory>, set: &mut StaticFeatureSet) {
    let mut component = component;
    match el.name.as_str() {
        "uses-permission" => {
            if let Some(n) = el.attr("name") {
                set.insert(FeatureCategory::Permission, n);
            }
        }
        "service" => {
            if let Some(n) = el.attr("name") {
                set.insert(FeatureCategory::Service, n);
            }
            component = Some(FeatureCategory::Service);
        }
        "receiver" => {
            if let Some(n) = el.attr("name") {
                set.insert(FeatureCategory::Receiver, n);
            }
            component = Some(FeatureCategory::Receiver);
        }
        "intent-filter" => {
            if component.is_some() {
                for action in el.children.iter().filter(|c| c.name == "action") {
                    if let Some(n) = action.attr("name") {
                        set.insert(FeatureCategory::IntentAction, n);
                    }
                }
            }
            return;
        }
        // activities, providers and the like reset component context
        "activity" | "activity-alias" | "provider" => component = None,
        _ => {}
    }
    for child in &el.children {
        visit(child, component, set);
    }
}

#[derive(Error, Debug)]
pub enum LoadError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct RawRecord {
    apk_id: Option<String>,
    #[serde(default)]
    permissions: Vec<String>,
    #[serde(default)]
    services: Vec<String>,
    #[serde(default)]
    receivers: Vec<String>,
    #[serde(default)]
    intent_actions: Vec<String>,
}

/// Read a JSON Lines feature dump. Blank lines are skipped.
pub fn read_features_jsonl(reader: impl BufRead) -> Result<Vec<StaticFeatureSet>, LoadError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| LoadError::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        let apk_id = raw
            .apk_id
            .map(|s| s.trim().to_owned())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| LoadError::MalformedRecord {
                line: lineno,
                reason: "missing apk_id".into(),
            })?;
        let mut set = StaticFeatureSet::new(apk_id);
        for (cat, values) in [
            (FeatureCategory::Permission, raw.permissions),
            (FeatureCategory::Service, raw.services),
            (FeatureCategory::Receiver, raw.receivers),
            (FeatureCategory::IntentAction, raw.intent_actions),
        ] {
            for v in values {
                set.insert(cat, &v);
            }
        }
        out.push(set);
    }
    Ok(out)
}

pub fn load_features_json(path: impl AsRef<std::path::Path>) -> Result<Vec<StaticFeatureSet>, LoadError> {
    let f = std::fs::File::open(path)?;
    read_features_jsonl(std::io::BufReader::new(f))
}

pub fn write_features_jsonl<'a>(
    mut w: impl Write,
    sets: impl IntoIterator<Item = &'a StaticFeatureSet>,
) -> std::io::Result<()> {
    for s in sets {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_feature("  android.permission.CAMERA\n").unwrap(),
            "android.permission.CAMERA"
        );
        assert_eq!(
            normalize_feature("\"com.example.MyService\"").unwrap(),
            "com.example.MyService"
        );
        assert_eq!(normalize_feature("   "), Err(EmptyAfterNormalization));
        assert_eq!(normalize_feature("\"\""), Err(EmptyAfterNormalization));
        assert_eq!(normalize_feature("com. example .X").unwrap(), "com.example.X");
    }

    #[test]
    fn jsonl_examples() {
        let src = r#"{"apk_id":"a1","permissions":[" android.permission.SEND_SMS "]}"#;
        let sets = read_features_jsonl(src.as_bytes()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(
            sets[0].permissions.iter().collect::<Vec<_>>(),
            ["android.permission.SEND_SMS"]
        );
        assert!(sets[0].services.is_empty());

        let src = "{\"apk_id\":\"a\"}\n{\"permissions\":[]}\n";
        match read_features_jsonl(src.as_bytes()) {
            Err(LoadError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        assert!(read_features_jsonl("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn jsonl_dedups_after_normalization() {
        let src = r#"{"apk_id":"a","receivers":["x.R"," x.R","","x.R\n"]}"#;
        let sets = read_features_jsonl(src.as_bytes()).unwrap();
        assert_eq!(sets[0].receivers.len(), 1);
    }

    #[test]
    fn category_round_trips_through_str() {
        for c in FeatureCategory::ALL {
            assert_eq!(c.as_str().parse::<FeatureCategory>().unwrap(), c);
        }
    }

    fn el(name: &str, attr: Option<&str>, children: Vec<Element>) -> Element {
        Element {
            namespace: None,
            name: name.into(),
            attributes: attr
                .map(|v| {
                    vec![Attribute {
                        namespace: Some(axml::ANDROID_NS.into()),
                        name: "name".into(),
                        value: v.into(),
                    }]
                })
                .unwrap_or_default(),
            children,
        }
    }

    #[test]
    fn activity_intent_filters_are_ignored() {
        let root = el(
            "manifest",
            None,
            vec![
                el("uses-permission", Some("p.A"), vec![]),
                el("uses-permission", Some("p.A"), vec![]),
                el(
                    "application",
                    None,
                    vec![
                        el(
                            "activity",
                            Some("x.Main"),
                            vec![el(
                                "intent-filter",
                                None,
                                vec![el("action", Some("android.intent.action.MAIN"), vec![])],
                            )],
                        ),
                        el(
                            "service",
                            Some("x.Svc"),
                            vec![el("intent-filter", None, vec![el("action", Some("x.START"), vec![])])],
                        ),
                    ],
                ),
            ],
        );
        let doc = ManifestDocument { root, strings: vec![] };
        let set = extract_features(&doc, "id");
        assert_eq!(set.permissions.len(), 1);
        assert_eq!(set.services.iter().collect::<Vec<_>>(), ["x.Svc"]);
        assert_eq!(set.intent_actions.iter().collect::<Vec<_>>(), ["x.START"]);
        assert!(set.receivers.is_empty());
    }
}
