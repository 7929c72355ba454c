use std::sync::{Arc, Mutex};
use std::time::Instant;

/// A published result together with its slot version.
#[derive(Debug)]
pub struct Envelope<T> {
    pub payload: Arc<T>,
    pub version: u64,
    pub published_at: Instant,
}

impl<T> Clone for Envelope<T> {
    fn clone(&self) -> Self {
        Envelope {
            payload: Arc::clone(&self.payload),
            version: self.version,
            published_at: self.published_at,
        }
    }
}

/// What a consumer reads from a slot.
#[derive(Debug)]
pub enum SlotValue<T> {
    /// Nothing published since start or the last reset.
    Void {
        version: u64,
    },
    Ready(Envelope<T>),
}

impl<T> Clone for SlotValue<T> {
    fn clone(&self) -> Self {
        match self {
            SlotValue::Void { version } => SlotValue::Void { version: *version },
            SlotValue::Ready(e) => SlotValue::Ready(e.clone()),
        }
    }
}

impl<T> SlotValue<T> {
    pub fn version(&self) -> u64 {
        match self {
            SlotValue::Void { version } => *version,
            SlotValue::Ready(e) => e.version,
        }
    }

    pub fn is_void(&self) -> bool {
        matches!(self, SlotValue::Void { .. })
    }

    pub fn payload(&self) -> Option<&Arc<T>> {
        match self {
            SlotValue::Void { .. } => None,
            SlotValue::Ready(e) => Some(&e.payload),
        }
    }
}

#[derive(Debug)]
struct Cell<T> {
    value: Option<Arc<T>>,
    version: u64,
    published_at: Option<Instant>,
}

/// Mutually exclusive single-value cell between one producer and any number
/// of readers. Payloads are frozen behind an `Arc` at publication.
#[derive(Debug)]
pub struct ResultSlot<T> {
    cell: Mutex<Cell<T>>,
}

impl<T> Default for ResultSlot<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> ResultSlot<T> {
    pub fn new() -> Self {
        ResultSlot {
            cell: Mutex::new(Cell {
                value: None,
                version: 0,
                published_at: None,
            }),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Cell<T>> {
        self.cell.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Replaces the value and returns the new version.
    pub fn set(&self, payload: T) -> u64 {
        let payload = Arc::new(payload);
        let mut cell = self.lock();
        cell.value = Some(payload);
        cell.version += 1;
        cell.published_at = Some(Instant::now());
        cell.version
    }

    /// Back to void. The version is bumped so readers can tell a reset from
    /// a slot that was never written.
    pub fn clear(&self) -> u64 {
        let mut cell = self.lock();
        cell.value = None;
        cell.version += 1;
        cell.published_at = Some(Instant::now());
        cell.version
    }

    pub fn get(&self) -> SlotValue<T> {
        let cell = self.lock();
        match (&cell.value, cell.published_at) {
            (Some(v), Some(at)) => SlotValue::Ready(Envelope {
                payload: Arc::clone(v),
                version: cell.version,
                published_at: at,
            }),
            _ => SlotValue::Void {
                version: cell.version,
            },
        }
    }

    pub fn version(&self) -> u64 {
        self.lock().version
    }
}
