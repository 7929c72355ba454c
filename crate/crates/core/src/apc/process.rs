use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{
    ApcError, Completion, ControlMessage, Directive, EventClock, ProcessId, Producer, ResultSlot,
    SlotValue, StartOptions, Status,
};

struct Control<I> {
    mailbox: VecDeque<ControlMessage<I>>,
    status: Status,
    history: Vec<(Status, Status)>,
    terminated: bool,
    /// Lockstep bookkeeping: status checks entered, and checks released.
    polls: u64,
    allowed: u64,
    resets_requested: u64,
    resets_applied: u64,
}

impl<I> Control<I> {
    fn set_status(&mut self, to: Status) {
        let from = self.status;
        if from == to {
            return;
        }
        if !from.can_transition(to) {
            log::error!("illegal status transition {from:?} -> {to:?}");
        }
        self.history.push((from, to));
        self.status = to;
    }
}

struct Shared<I, T> {
    id: ProcessId,
    slot: ResultSlot<T>,
    control: Mutex<Control<I>>,
    changed: Condvar,
    clock: Arc<EventClock>,
    lockstep: bool,
}

impl<I, T> Shared<I, T> {
    fn lock(&self) -> MutexGuard<'_, Control<I>> {
        self.control.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn wait<'a>(&self, guard: MutexGuard<'a, Control<I>>) -> MutexGuard<'a, Control<I>> {
        self.changed.wait(guard).unwrap_or_else(|e| e.into_inner())
    }
}

type Hook = Box<dyn FnMut(&str, &str) + Send>;

/// The producer's side of a process: publication, status checks and hooks.
pub struct ProducerContext<I, T> {
    shared: Arc<Shared<I, T>>,
    aborted: bool,
    ping_hook: Option<Box<dyn FnMut() + Send>>,
    user_hooks: BTreeMap<String, Hook>,
    pings: u64,
}

enum Fire {
    Ping,
    User(String, String),
}

impl<I, T> ProducerContext<I, T> {
    pub fn id(&self) -> ProcessId {
        self.shared.id
    }

    pub fn clock(&self) -> &Arc<EventClock> {
        &self.shared.clock
    }

    /// Publishes `payload`, returning the new slot version. After an abort
    /// has been observed this does nothing and returns the last version.
    pub fn set_result(&mut self, payload: T) -> u64 {
        if self.aborted {
            return self.shared.slot.version();
        }
        self.shared.slot.set(payload)
    }

    pub fn slot_version(&self) -> u64 {
        self.shared.slot.version()
    }

    pub fn on_ping(&mut self, hook: impl FnMut() + Send + 'static) {
        self.ping_hook = Some(Box::new(hook));
    }

    /// Registers a handler for user messages carrying `tag`.
    pub fn on_user(&mut self, tag: &str, hook: impl FnMut(&str, &str) + Send + 'static) {
        self.user_hooks.insert(tag.to_string(), Box::new(hook));
    }

    pub fn pings_seen(&self) -> u64 {
        self.pings
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    /// Drains the mailbox up to the first abort or reset. In lockstep mode
    /// the producer first parks here until the consumer advances it.
    pub fn check_status(&mut self) -> Directive<I> {
        self.poll(self.shared.lockstep)
    }

    pub(crate) fn poll(&mut self, park: bool) -> Directive<I> {
        let mut fired = Vec::new();
        let directive = {
            let mut g = self.shared.lock();
            if park {
                g.polls += 1;
                self.shared.changed.notify_all();
                while g.allowed < g.polls {
                    g = self.shared.wait(g);
                }
            }
            let mut directive = Directive::Continue;
            while let Some(msg) = g.mailbox.pop_front() {
                match msg {
                    ControlMessage::Ping => fired.push(Fire::Ping),
                    ControlMessage::UserHook { tag, payload } => {
                        fired.push(Fire::User(tag, payload))
                    }
                    ControlMessage::Abort => {
                        g.set_status(Status::Aborted);
                        self.aborted = true;
                        directive = Directive::StopNow;
                        break;
                    }
                    ControlMessage::Reset(input) => {
                        g.set_status(Status::Resetting);
                        directive = Directive::ResetWith(input);
                        break;
                    }
                }
            }
            self.shared.changed.notify_all();
            directive
        };
        for f in fired {
            self.fire(f);
        }
        directive
    }

    fn fire(&mut self, f: Fire) {
        match f {
            Fire::Ping => {
                self.pings += 1;
                if let Some(h) = self.ping_hook.as_mut() {
                    h();
                }
            }
            Fire::User(tag, payload) => match self.user_hooks.get_mut(&tag) {
                Some(h) => h(&tag, &payload),
                None => log::debug!("process {}: no hook for '{tag}'", self.shared.id),
            },
        }
    }
}

/// Result of [`ProcessHandle::wait_parked`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parked {
    /// Parked in its n-th status check.
    AtCheck(u64),
    /// Not running any more: quiescent or aborted.
    Idle(Status),
}

/// The consumer's side of a process.
pub struct ProcessHandle<I, T> {
    shared: Arc<Shared<I, T>>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl<I, T> ProcessHandle<I, T> {
    pub fn id(&self) -> ProcessId {
        self.shared.id
    }

    pub fn status(&self) -> Status {
        self.shared.lock().status
    }

    /// Every status transition taken so far, in order.
    pub fn status_history(&self) -> Vec<(Status, Status)> {
        self.shared.lock().history.clone()
    }

    pub fn clock(&self) -> &Arc<EventClock> {
        &self.shared.clock
    }

    /// The latest published value. Still readable after an abort.
    pub fn get_result(&self) -> SlotValue<T> {
        self.shared.slot.get()
    }

    fn enqueue(&self, g: &mut Control<I>, msg: ControlMessage<I>) -> u64 {
        let tick = self.shared.clock.tick();
        g.mailbox.push_back(msg);
        self.shared.changed.notify_all();
        tick
    }

    /// Queues an abort and returns its clock stamp without waiting.
    /// Aborting an aborted process does nothing.
    pub fn request_abort(&self) -> u64 {
        let mut g = self.shared.lock();
        if g.status == Status::Aborted || g.terminated {
            return self.shared.clock.now();
        }
        self.enqueue(&mut g, ControlMessage::Abort)
    }

    /// Aborts and waits until the producer has stopped.
    pub fn abort(&self) {
        self.request_abort();
        if self.shared.lockstep {
            self.advance();
        }
        let mut g = self.shared.lock();
        while !g.terminated {
            g = self.shared.wait(g);
        }
        drop(g);
        self.join();
    }

    /// Queues a reset; returns a ticket for [`ProcessHandle::wait_reset`].
    pub fn request_reset(&self, input: I) -> Result<u64, ApcError> {
        let mut g = self.shared.lock();
        if g.status == Status::Aborted || g.terminated {
            return Err(ApcError::Aborted(self.shared.id));
        }
        g.resets_requested += 1;
        let ticket = g.resets_requested;
        self.enqueue(&mut g, ControlMessage::Reset(input));
        Ok(ticket)
    }

    /// Waits until the reset with `ticket` has been applied.
    pub fn wait_reset(&self, ticket: u64) -> Result<(), ApcError> {
        let mut g = self.shared.lock();
        while g.resets_applied < ticket {
            if g.terminated {
                return Err(ApcError::Aborted(self.shared.id));
            }
            g = self.shared.wait(g);
        }
        Ok(())
    }

    /// Resets the producer with new input and waits until it is running
    /// again.
    pub fn reset(&self, input: I) -> Result<(), ApcError> {
        let ticket = self.request_reset(input)?;
        if self.shared.lockstep {
            self.advance();
        }
        self.wait_reset(ticket)
    }

    pub fn ping(&self) -> Result<u64, ApcError> {
        self.send(ControlMessage::Ping)
    }

    pub fn send_user(&self, tag: &str, payload: &str) -> Result<u64, ApcError> {
        self.send(ControlMessage::UserHook {
            tag: tag.to_string(),
            payload: payload.to_string(),
        })
    }

    fn send(&self, msg: ControlMessage<I>) -> Result<u64, ApcError> {
        let mut g = self.shared.lock();
        if g.terminated {
            return Err(ApcError::Aborted(self.shared.id));
        }
        Ok(self.enqueue(&mut g, msg))
    }

    pub fn is_lockstep(&self) -> bool {
        self.shared.lockstep
    }

    /// Lockstep mode: blocks until the producer is parked in a status check
    /// or has gone idle.
    pub fn wait_parked(&self) -> Parked {
        let mut g = self.shared.lock();
        loop {
            if g.terminated || g.status == Status::Aborted {
                return Parked::Idle(Status::Aborted);
            }
            if g.polls > g.allowed {
                return Parked::AtCheck(g.polls);
            }
            if g.status == Status::Quiescent && g.mailbox.is_empty() {
                return Parked::Idle(Status::Quiescent);
            }
            g = self.shared.wait(g);
        }
    }

    /// Lockstep mode: lets the producer pass one status check.
    pub fn advance(&self) {
        let mut g = self.shared.lock();
        g.allowed = g.allowed.saturating_add(1);
        self.shared.changed.notify_all();
    }

    /// Waits until the producer is quiescent or stopped, or `timeout`
    /// passes. Returns the status seen last.
    pub fn wait_idle(&self, timeout: Duration) -> Status {
        let deadline = Instant::now() + timeout;
        let mut g = self.shared.lock();
        loop {
            let idle = g.terminated || (g.status == Status::Quiescent && g.mailbox.is_empty());
            if idle {
                return g.status;
            }
            let now = Instant::now();
            if now >= deadline {
                return g.status;
            }
            g = self
                .shared
                .changed
                .wait_timeout(g, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    fn join(&self) {
        let handle = self.thread.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }
}

impl<I, T> Drop for ProcessHandle<I, T> {
    fn drop(&mut self) {
        let mut g = self.shared.lock();
        if !g.terminated {
            g.mailbox.push_back(ControlMessage::Abort);
            // Release any park for good so the thread can wind down.
            g.allowed = u64::MAX;
            self.shared.changed.notify_all();
        }
    }
}

/// Starts `producer` on its own thread with a fresh void slot.
pub fn start_process<P: Producer>(
    mut producer: P,
    input: P::Input,
    options: StartOptions,
) -> Result<ProcessHandle<P::Input, P::Output>, ApcError> {
    let id = super::ProcessId::fresh();
    let shared = Arc::new(Shared {
        id,
        slot: ResultSlot::new(),
        control: Mutex::new(Control {
            mailbox: VecDeque::new(),
            status: Status::Running,
            history: Vec::new(),
            terminated: false,
            polls: 0,
            allowed: 0,
            resets_requested: 0,
            resets_applied: 0,
        }),
        changed: Condvar::new(),
        clock: Arc::new(EventClock::new()),
        lockstep: options.lockstep,
    });
    let mut ctx = ProducerContext {
        shared: Arc::clone(&shared),
        aborted: false,
        ping_hook: None,
        user_hooks: BTreeMap::new(),
        pings: 0,
    };
    let name = options.name.unwrap_or_else(|| format!("apc-{id}"));
    let thread = std::thread::Builder::new()
        .name(name)
        .spawn(move || {
            let outcome = catch_unwind(AssertUnwindSafe(|| drive(&mut producer, input, &mut ctx)));
            if outcome.is_err() {
                log::error!("process {id} panicked");
            }
            let mut g = ctx.shared.lock();
            g.set_status(Status::Aborted);
            g.terminated = true;
            ctx.shared.changed.notify_all();
        })
        .map_err(|e| ApcError::StartFailed(e.to_string()))?;
    Ok(ProcessHandle {
        shared,
        thread: Mutex::new(Some(thread)),
    })
}

fn apply_reset<P: Producer>(producer: &mut P, ctx: &mut ProducerContext<P::Input, P::Output>) {
    producer.cleanup();
    ctx.shared.slot.clear();
    let mut g = ctx.shared.lock();
    g.set_status(Status::Running);
    g.resets_applied += 1;
    ctx.shared.changed.notify_all();
}

fn drive<P: Producer>(
    producer: &mut P,
    mut input: P::Input,
    ctx: &mut ProducerContext<P::Input, P::Output>,
) {
    loop {
        // Messages queued before (re)starting take effect without parking.
        match ctx.poll(false) {
            Directive::StopNow => return,
            Directive::ResetWith(next) => {
                apply_reset(producer, ctx);
                input = next;
                continue;
            }
            Directive::Continue => {}
        }
        match producer.run(input, ctx) {
            Completion::Stopped => return,
            Completion::Reset(next) => {
                apply_reset(producer, ctx);
                input = next;
            }
            Completion::Done => {
                if ctx.aborted {
                    return;
                }
                match idle(ctx) {
                    Some(next) => {
                        apply_reset(producer, ctx);
                        input = next;
                    }
                    None => return,
                }
            }
        }
    }
}

/// Quiescent: serve messages until an abort (None) or a reset.
fn idle<I, T>(ctx: &mut ProducerContext<I, T>) -> Option<I> {
    {
        let mut g = ctx.shared.lock();
        g.set_status(Status::Quiescent);
        ctx.shared.changed.notify_all();
    }
    loop {
        let msg = {
            let mut g = ctx.shared.lock();
            loop {
                if let Some(m) = g.mailbox.pop_front() {
                    // Waiters watch for an empty mailbox.
                    ctx.shared.changed.notify_all();
                    break m;
                }
                g = ctx.shared.wait(g);
            }
        };
        match msg {
            ControlMessage::Ping => ctx.fire(Fire::Ping),
            ControlMessage::UserHook { tag, payload } => ctx.fire(Fire::User(tag, payload)),
            ControlMessage::Abort => {
                ctx.aborted = true;
                let mut g = ctx.shared.lock();
                g.set_status(Status::Aborted);
                ctx.shared.changed.notify_all();
                return None;
            }
            ControlMessage::Reset(next) => {
                let mut g = ctx.shared.lock();
                g.set_status(Status::Resetting);
                ctx.shared.changed.notify_all();
                return Some(next);
            }
        }
    }
}
