use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{ClipWindow, FrameMeta, FramePaths, FrameRef, CLIP_LEN};
use crate::map::GridDims;

pub const MANIFEST_FORMAT: &str = "sage-corpus";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Artifact paths for one frame, relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_id: u64,
    pub gaze: PathBuf,
    pub mask: PathBuf,
    pub nearness: PathBuf,
    pub prediction: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_sage: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sage: Option<PathBuf>,
    pub meta: PathBuf,
}

impl FrameEntry {
    /// Standard layout: `<dir>/{gaze.smap, mask.bmsk, nearness.smap, prediction.smap, meta.json}`.
    pub fn conventional(frame_id: u64, dir: &Path) -> Self {
        Self {
            frame_id,
            gaze: dir.join("gaze.smap"),
            mask: dir.join("mask.bmsk"),
            nearness: dir.join("nearness.smap"),
            prediction: dir.join("prediction.smap"),
            prediction_sage: None,
            sage: None,
            meta: dir.join("meta.json"),
        }
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [
            Some(&self.gaze),
            Some(&self.mask),
            Some(&self.nearness),
            Some(&self.prediction),
            self.prediction_sage.as_ref(),
            self.sage.as_ref(),
            Some(&self.meta),
        ]
        .into_iter()
        .flatten()
    }

    fn prefixed(mut self, prefix: &Path) -> Self {
        let join = |p: &mut PathBuf| *p = prefix.join(&*p);
        join(&mut self.gaze);
        join(&mut self.mask);
        join(&mut self.nearness);
        join(&mut self.prediction);
        join(&mut self.meta);
        if let Some(p) = self.prediction_sage.as_mut() {
            join(p);
        }
        if let Some(p) = self.sage.as_mut() {
            join(p);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    #[serde(default)]
    pub scenario_tags: BTreeSet<String>,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub version: u32,
    pub dims: GridDims,
    pub clips: Vec<ClipEntry>,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn new(dims: GridDims, clips: Vec<ClipEntry>, root: impl Into<PathBuf>) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_owned(),
            version: MANIFEST_VERSION,
            dims,
            clips,
            root: root.into(),
        }
    }

    /// Parses and structurally validates a manifest. Missing artifact files
    /// are not an error here; see [`CorpusManifest::missing_files`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: CorpusManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(m)
    }

    /// Like [`load`](Self::load), but every referenced file must exist.
    pub fn load_strict(path: impl AsRef<Path>) -> Result<Self> {
        let m = Self::load(path)?;
        if let Some((clip, missing)) = m.missing_files().into_iter().next() {
            return Err(
                Error::invalid(format!("missing artifact {}", missing.display())).in_clip(&clip),
            );
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MANIFEST_FORMAT {
            return Err(Error::invalid(format!(
                "unknown manifest format `{}`",
                self.format
            )));
        }
        if self.version != MANIFEST_VERSION {
            return Err(Error::invalid(format!(
                "unsupported manifest version {}",
                self.version
            )));
        }
        GridDims::new(self.dims.height, self.dims.width)?;
        let mut seen = BTreeSet::new();
        for clip in &self.clips {
            if !seen.insert(clip.clip_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate clip id `{}`",
                    clip.clip_id
                )));
            }
            if clip.frames.len() != CLIP_LEN {
                return Err(Error::invalid(format!(
                    "clip `{}` has {} frames, expected {CLIP_LEN}",
                    clip.clip_id,
                    clip.frames.len()
                )));
            }
            if clip
                .frames
                .windows(2)
                .any(|w| w[0].frame_id >= w[1].frame_id)
            {
                return Err(Error::invalid(format!(
                    "clip `{}`: frame ids must be strictly increasing",
                    clip.clip_id
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    /// `(clip_id, path)` for every referenced file that does not exist.
    pub fn missing_files(&self) -> Vec<(String, PathBuf)> {
        let mut out = Vec::new();
        for clip in &self.clips {
            for frame in &clip.frames {
                for p in frame.paths() {
                    let full = self.resolve(p);
                    if !full.is_file() {
                        out.push((clip.clip_id.clone(), full));
                    }
                }
            }
        }
        out
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipEntry> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    /// Loads the clip's sidecars and builds the pipeline's clip window.
    pub fn load_clip(&self, clip: &ClipEntry) -> Result<ClipWindow> {
        let load = || -> Result<ClipWindow> {
            let mut frames = Vec::with_capacity(clip.frames.len());
            for f in &clip.frames {
                let meta_path = self.resolve(&f.meta);
                let meta = FrameMeta::load(&meta_path)?;
                if meta.frame_id != f.frame_id {
                    return Err(Error::invalid(format!(
                        "{} declares frame_id {}, manifest says {}",
                        meta_path.display(),
                        meta.frame_id,
                        f.frame_id
                    )));
                }
                meta.validate(self.dims)?;
                frames.push(FrameRef {
                    meta,
                    paths: FramePaths {
                        gaze: self.resolve(&f.gaze),
                        mask: self.resolve(&f.mask),
                        nearness: self.resolve(&f.nearness),
                        prediction: self.resolve(&f.prediction),
                        prediction_sage: f.prediction_sage.as_ref().map(|p| self.resolve(p)),
                        sage: f.sage.as_ref().map(|p| self.resolve(p)),
                        meta: meta_path,
                    },
                });
            }
            ClipWindow::new(clip.clip_id.clone(), frames)
        };
        load().map_err(|e| e.in_clip(&clip.clip_id))
    }

    /// Combines manifests living in subdirectories of `root`. Paths are
    /// re-rooted and clip ids must stay unique.
    pub fn merge(root: impl Into<PathBuf>, parts: &[(PathBuf, CorpusManifest)]) -> Result<Self> {
        let dims = parts
            .first()
            .map(|(_, m)| m.dims)
            .ok_or_else(|| Error::invalid("nothing to merge"))?;
        let mut clips = Vec::new();
        for (prefix, m) in parts {
            if m.dims != dims {
                return Err(Error::DimMismatch {
                    expected: dims,
                    found: m.dims,
                });
            }
            for c in &m.clips {
                clips.push(ClipEntry {
                    clip_id: c.clip_id.clone(),
                    scenario_tags: c.scenario_tags.clone(),
                    frames: c
                        .frames
                        .iter()
                        .cloned()
                        .map(|f| f.prefixed(prefix))
                        .collect(),
                });
            }
        }
        let merged = Self::new(dims, clips, root);
        merged.validate()?;
        Ok(merged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, start: u64) -> ClipEntry {
        ClipEntry {
            clip_id: id.to_owned(),
            scenario_tags: ["crossing".to_owned()].into(),
            frames: (start..start + 16)
                .map(|i| FrameEntry::conventional(i, &PathBuf::from(format!("frames/{i:06}"))))
                .collect(),
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let m = CorpusManifest::new(
            GridDims::new(8, 8).unwrap(),
            vec![entry("a", 0)],
            dir.path(),
        );
        let path = dir.path().join(MANIFEST_FILE);
        m.save(&path).unwrap();
        let back = CorpusManifest::load(&path).unwrap();
        assert_eq!(back.clips, m.clips);
        assert_eq!(back.missing_files().len(), 16 * 5);
        assert!(CorpusManifest::load_strict(&path).is_err());

        let mut bad = m.clone();
        bad.clips[0].frames.pop();
        assert!(bad.validate().is_err());
        let mut dup = m.clone();
        dup.clips.push(entry("a", 16));
        assert!(dup.validate().is_err());
    }

    #[test]
    fn merge_prefixes_paths() {
        let d = GridDims::new(8, 8).unwrap();
        let a = CorpusManifest::new(d, vec![entry("a", 0)], "x");
        let b = CorpusManifest::new(d, vec![entry("b", 0)], "y");
        let merged =
            CorpusManifest::merge("root", &[("one".into(), a.clone()), ("two".into(), b)]).unwrap();
        assert_eq!(merged.clips.len(), 2);
        assert_eq!(
            merged.clips[1].frames[0].gaze,
            PathBuf::from("two/frames/000000/gaze.smap")
        );
        assert!(
            CorpusManifest::merge("r", &[("one".into(), a.clone()), ("two".into(), a)]).is_err()
        );
    }
}
