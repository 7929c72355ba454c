use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::{
    start_process, ApcError, ProcessHandle, ProcessId, Producer, SlotValue, StartOptions, Status,
};

/// Processes addressed by id, for consumers that do not keep handles.
pub struct Apc<I, T> {
    processes: Mutex<BTreeMap<ProcessId, Arc<ProcessHandle<I, T>>>>,
}

impl<I, T> Default for Apc<I, T> {
    fn default() -> Self {
        Apc {
            processes: Mutex::new(BTreeMap::new()),
        }
    }
}

impl<I, T> Apc<I, T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_process<P>(
        &self,
        producer: P,
        input: I,
        options: StartOptions,
    ) -> Result<ProcessId, ApcError>
    where
        P: Producer<Input = I, Output = T>,
    {
        let handle = start_process(producer, input, options)?;
        let id = handle.id();
        self.lock().insert(id, Arc::new(handle));
        Ok(id)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BTreeMap<ProcessId, Arc<ProcessHandle<I, T>>>> {
        self.processes.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn handle(&self, id: ProcessId) -> Result<Arc<ProcessHandle<I, T>>, ApcError> {
        self.lock()
            .get(&id)
            .cloned()
            .ok_or(ApcError::UnknownProcess(id))
    }

    pub fn get_result(&self, id: ProcessId) -> Result<SlotValue<T>, ApcError> {
        Ok(self.handle(id)?.get_result())
    }

    pub fn abort_process(&self, id: ProcessId) -> Result<(), ApcError> {
        self.handle(id)?.abort();
        Ok(())
    }

    pub fn reset_process(&self, id: ProcessId, input: I) -> Result<(), ApcError> {
        self.handle(id)?.reset(input)
    }

    /// Consumer-side status query.
    pub fn check_status(&self, id: ProcessId) -> Result<Status, ApcError> {
        Ok(self.handle(id)?.status())
    }

    pub fn ids(&self) -> Vec<ProcessId> {
        self.lock().keys().copied().collect()
    }
}
