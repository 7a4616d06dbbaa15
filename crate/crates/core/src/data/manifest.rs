//! Line-oriented dataset manifest.
//!
//! ```text
//! #classes<TAB>C<TAB>name_0<TAB>…<TAB>name_{C-1}
//! path<TAB>label[,label…]<TAB>train|test
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{read_cube, FeatureCubeClip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub labels: Vec<usize>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative entry paths are resolved against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.len() < 2 {
            return Err(Error::Data("manifest needs at least two classes".into()));
        }
        for e in &self.entries {
            if e.labels.is_empty() {
                return Err(Error::Data(format!("{} has no labels", e.path.display())));
            }
            if let Some(&bad) = e.labels.iter().find(|&&l| l >= self.num_classes()) {
                return Err(Error::Data(format!(
                    "{}: label {bad} out of range for {} classes",
                    e.path.display(),
                    self.num_classes()
                )));
            }
        }
        for split in [Split::Train, Split::Test] {
            if !self.entries.iter().any(|e| e.split == split) {
                return Err(Error::Data(format!(
                    "manifest has no {} entries",
                    split.name()
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Loads every clip of one split; manifest labels take precedence over the
    /// labels stored in the cube, and the two must agree.
    pub fn load(&self, split: Split) -> Result<Vec<FeatureCubeClip>> {
        self.entries(split)
            .map(|e| {
                let path = self.resolve(e);
                if !path.exists() {
                    return Err(Error::Data(format!("missing cube file {}", path.display())));
                }
                let clip = read_cube(&path)?;
                if clip.labels != e.labels {
                    return Err(Error::Data(format!(
                        "{}: manifest labels {:?} disagree with cube labels {:?}",
                        path.display(),
                        e.labels,
                        clip.labels
                    )));
                }
                Ok(clip)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#classes\t{}", self.class_names.len());
        for n in &self.class_names {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for e in &self.entries {
            let labels: Vec<String> = e.labels.iter().map(usize::to_string).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                e.path.display(),
                labels.join(","),
                e.split.name()
            ));
        }
        out
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Data("empty manifest".into()))?;
        let mut fields = header.split('\t');
        if fields.next() != Some("#classes") {
            return Err(Error::Data(
                "manifest must start with a #classes header".into(),
            ));
        }
        let count: usize = fields
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Data("manifest header lacks a class count".into()))?;
        let class_names: Vec<String> = fields.map(str::to_string).collect();
        if class_names.len() != count {
            return Err(Error::Data(format!(
                "header declares {count} classes but names {}",
                class_names.len()
            )));
        }
        let mut entries = Vec::new();
        for (lineno, line) in lines {
            let parts: Vec<&str> = line.split('\t').collect();
            let [path, labels, split] = parts.as_slice() else {
                return Err(Error::Data(format!(
                    "manifest line {}: expected 3 tab-separated fields",
                    lineno + 1
                )));
            };
            let labels = labels
                .split(',')
                .map(|l| {
                    l.trim().parse::<usize>().map_err(|_| {
                        Error::Data(format!("manifest line {}: bad label {l:?}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push(ManifestEntry {
                path: PathBuf::from(path),
                labels,
                split: split.parse()?,
            });
        }
        let manifest = Self {
            class_names,
            entries,
            root: root.into(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DatasetManifest {
        DatasetManifest {
            class_names: vec!["run".into(), "jump".into(), "swim".into()],
            entries: vec![
                ManifestEntry {
                    path: "a.fcub".into(),
                    labels: vec![0],
                    split: Split::Train,
                },
                ManifestEntry {
                    path: "b.fcub".into(),
                    labels: vec![1, 2],
                    split: Split::Test,
                },
            ],
            root: PathBuf::from("/data"),
        }
    }

    #[test]
    fn text_round_trip() {
        let m = sample();
        let text = m.to_text();
        assert!(text.starts_with("#classes\t3\trun\tjump\tswim\n"));
        assert!(text.contains("b.fcub\t1,2\ttest\n"));
        assert_eq!(DatasetManifest::parse(&text, "/data").unwrap(), m);
    }

    #[test]
    fn validation_failures() {
        let mut m = sample();
        m.entries[0].labels = vec![3];
        assert!(m.validate().is_err());

        let mut m = sample();
        m.entries.retain(|e| e.split == Split::Train);
        assert!(m.validate().is_err());

        assert!(DatasetManifest::parse("#classes\t2\ta\n", "/").is_err());
        assert!(DatasetManifest::parse("#classes\t2\ta\tb\nx\t0\n", "/").is_err());
        assert!(DatasetManifest::parse("#classes\t2\ta\tb\nx\t0\tvalid\n", "/").is_err());
    }

    #[test]
    fn missing_file_is_data_error() {
        let m = sample();
        assert!(matches!(m.load(Split::Train), Err(Error::Data(_))));
    }
}
