//! Perception behind narrow interfaces: saliency, nearness, crossing intent and
//! person detection. File-backed implementations read corpus artifacts; the
//! in-memory ones exist for tests and benchmarks.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::clip::{ClipWindow, FrameRef, Intent};
use crate::error::{Error, Result};
use crate::map::{self, BBox, SalMap};

/// Identity and threading contract shared by every provider.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    /// `false` means calls must never overlap; the bundle serializes them.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

pub trait SaliencyProvider: Provider {
    /// Raw prediction for the clip's last frame.
    fn predict(&self, clip: &ClipWindow) -> Result<SalMap>;
}

pub trait NearnessProvider: Provider {
    /// Values in [0, 1], 1 = nearest.
    fn nearness(&self, frame: &FrameRef) -> Result<SalMap>;
}

pub trait IntentProvider: Provider {
    fn intent(&self, clip: &ClipWindow) -> Result<Intent>;
}

pub trait DetectorProvider: Provider {
    fn detect(&self, frame: &FrameRef) -> Result<Vec<BBox>>;
}

struct Slot<P: ?Sized> {
    provider: Arc<P>,
    gate: Mutex<()>,
}

impl<P: Provider + ?Sized> Slot<P> {
    fn new(provider: Arc<P>) -> Self {
        Self {
            provider,
            gate: Mutex::new(()),
        }
    }

    fn call<T>(&self, f: impl FnOnce(&P) -> Result<T>) -> Result<T> {
        let p = &*self.provider;
        let out = if p.concurrent_safe() {
            f(p)
        } else {
            let _guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
            f(p)
        };
        out.map_err(|e| Error::Provider {
            provider: p.name().to_owned(),
            source: Box::new(e),
        })
    }
}

/// The four providers one pipeline run needs.
pub struct ProviderBundle {
    saliency: Slot<dyn SaliencyProvider>,
    nearness: Slot<dyn NearnessProvider>,
    intent: Slot<dyn IntentProvider>,
    detector: Slot<dyn DetectorProvider>,
}

impl ProviderBundle {
    pub fn new(
        saliency: Arc<dyn SaliencyProvider>,
        nearness: Arc<dyn NearnessProvider>,
        intent: Arc<dyn IntentProvider>,
        detector: Arc<dyn DetectorProvider>,
    ) -> Self {
        Self {
            saliency: Slot::new(saliency),
            nearness: Slot::new(nearness),
            intent: Slot::new(intent),
            detector: Slot::new(detector),
        }
    }

    /// Bundle reading `prediction.smap`, `nearness.smap` and `meta.json`.
    pub fn file_backed() -> Self {
        Self::new(
            Arc::new(FileSaliency),
            Arc::new(FileNearness),
            Arc::new(FileIntent),
            Arc::new(FileDetector),
        )
    }

    pub fn saliency(&self, clip: &ClipWindow) -> Result<SalMap> {
        self.saliency.call(|p| p.predict(clip))
    }

    pub fn nearness(&self, frame: &FrameRef) -> Result<SalMap> {
        let d = self.nearness.call(|p| p.nearness(frame))?;
        if d.max() > 1.0 {
            return Err(Error::Provider {
                provider: self.nearness.provider.name().to_owned(),
                source: Box::new(Error::invalid(format!(
                    "nearness values must lie in [0, 1], max is {}",
                    d.max()
                ))),
            });
        }
        Ok(d)
    }

    /// Crossing intent; anything other than an explicit `crossing` is treated
    /// as not crossing.
    pub fn intent(&self, clip: &ClipWindow) -> Result<Intent> {
        self.intent.call(|p| p.intent(clip)).map(|i| match i {
            Intent::Crossing => Intent::Crossing,
            _ => Intent::NotCrossing,
        })
    }

    pub fn detect(&self, frame: &FrameRef) -> Result<Vec<BBox>> {
        self.detector.call(|p| p.detect(frame))
    }
}

pub struct FileSaliency;

impl Provider for FileSaliency {
    fn name(&self) -> &str {
        "file:prediction"
    }
}

impl SaliencyProvider for FileSaliency {
    fn predict(&self, clip: &ClipWindow) -> Result<SalMap> {
        map::load_smap(&clip.last().paths.prediction)
    }
}

pub struct FileNearness;

impl Provider for FileNearness {
    fn name(&self) -> &str {
        "file:nearness"
    }
}

impl NearnessProvider for FileNearness {
    fn nearness(&self, frame: &FrameRef) -> Result<SalMap> {
        map::load_smap(&frame.paths.nearness)
    }
}

/// Reads the intent label from the last frame's sidecar.
pub struct FileIntent;

impl Provider for FileIntent {
    fn name(&self) -> &str {
        "file:intent"
    }
}

impl IntentProvider for FileIntent {
    fn intent(&self, clip: &ClipWindow) -> Result<Intent> {
        Ok(clip.last().meta.intent)
    }
}

/// Reads boxes from the frame sidecar.
pub struct FileDetector;

impl Provider for FileDetector {
    fn name(&self) -> &str {
        "file:detector"
    }
}

impl DetectorProvider for FileDetector {
    fn detect(&self, frame: &FrameRef) -> Result<Vec<BBox>> {
        Ok(frame.meta.bboxes.clone())
    }
}

/// Returns the same map for every request.
pub struct ConstantMap(pub SalMap);

impl Provider for ConstantMap {
    fn name(&self) -> &str {
        "constant"
    }
}

impl SaliencyProvider for ConstantMap {
    fn predict(&self, _clip: &ClipWindow) -> Result<SalMap> {
        Ok(self.0.clone())
    }
}

impl NearnessProvider for ConstantMap {
    fn nearness(&self, _frame: &FrameRef) -> Result<SalMap> {
        Ok(self.0.clone())
    }
}

pub struct ScriptedIntent(pub Intent);

impl Provider for ScriptedIntent {
    fn name(&self) -> &str {
        "scripted-intent"
    }
}

impl IntentProvider for ScriptedIntent {
    fn intent(&self, _clip: &ClipWindow) -> Result<Intent> {
        Ok(self.0)
    }
}

pub struct FixedDetector(pub Vec<BBox>);

impl Provider for FixedDetector {
    fn name(&self) -> &str {
        "fixed-detector"
    }
}

impl DetectorProvider for FixedDetector {
    fn detect(&self, _frame: &FrameRef) -> Result<Vec<BBox>> {
        Ok(self.0.clone())
    }
}

/// Always fails; useful for checking error propagation.
pub struct Failing(pub &'static str);

impl Provider for Failing {
    fn name(&self) -> &str {
        self.0
    }
}

impl SaliencyProvider for Failing {
    fn predict(&self, _clip: &ClipWindow) -> Result<SalMap> {
        Err(Error::invalid("provider unavailable"))
    }
}

impl NearnessProvider for Failing {
    fn nearness(&self, _frame: &FrameRef) -> Result<SalMap> {
        Err(Error::invalid("provider unavailable"))
    }
}

impl IntentProvider for Failing {
    fn intent(&self, _clip: &ClipWindow) -> Result<Intent> {
        Err(Error::invalid("provider unavailable"))
    }
}

impl DetectorProvider for Failing {
    fn detect(&self, _frame: &FrameRef) -> Result<Vec<BBox>> {
        Err(Error::invalid("provider unavailable"))
    }
}

/// Wraps a provider and counts how often it is invoked.
pub struct Counting<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P> Counting<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn tick(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

impl<P: Provider> Provider for Counting<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn concurrent_safe(&self) -> bool {
        self.inner.concurrent_safe()
    }
}

impl<P: SaliencyProvider> SaliencyProvider for Counting<P> {
    fn predict(&self, clip: &ClipWindow) -> Result<SalMap> {
        self.tick();
        self.inner.predict(clip)
    }
}

impl<P: NearnessProvider> NearnessProvider for Counting<P> {
    fn nearness(&self, frame: &FrameRef) -> Result<SalMap> {
        self.tick();
        self.inner.nearness(frame)
    }
}

impl<P: IntentProvider> IntentProvider for Counting<P> {
    fn intent(&self, clip: &ClipWindow) -> Result<Intent> {
        self.tick();
        self.inner.intent(clip)
    }
}

impl<P: DetectorProvider> DetectorProvider for Counting<P> {
    fn detect(&self, frame: &FrameRef) -> Result<Vec<BBox>> {
        self.tick();
        self.inner.detect(frame)
    }
}
