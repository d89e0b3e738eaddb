//! Per-connection send queue with two QoS classes.
//!
//! `Frame` messages are best-effort: once `frame_capacity` of them are queued,
//! pushing another evicts the oldest queued frame. State updates, calibration
//! results and errors are never dropped. The tick loop only ever pushes, so a
//! stalled client cannot block it.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use tokio::sync::Notify;

use crate::protocol::ServerMessage;

#[derive(Debug, Default)]
struct Queue {
    items: VecDeque<ServerMessage>,
    frames: usize,
    closed: bool,
}

#[derive(Debug)]
pub struct Outbox {
    queue: Mutex<Queue>,
    notify: Notify,
    frame_capacity: usize,
    dropped: AtomicU64,
}

impl Outbox {
    pub fn new(frame_capacity: usize) -> Self {
        Self {
            queue: Mutex::new(Queue::default()),
            notify: Notify::new(),
            frame_capacity: frame_capacity.max(1),
            dropped: AtomicU64::new(0),
        }
    }

    pub fn push(&self, msg: ServerMessage) {
        {
            let mut q = self.queue.lock().unwrap();
            if q.closed {
                return;
            }
            if msg.droppable() {
                if q.frames >= self.frame_capacity {
                    if let Some(i) = q.items.iter().position(ServerMessage::droppable) {
                        q.items.remove(i);
                        q.frames -= 1;
                        self.dropped.fetch_add(1, Ordering::Relaxed);
                    }
                }
                q.frames += 1;
            }
            q.items.push_back(msg);
        }
        self.notify.notify_one();
    }

    /// Next message in order, or `None` once closed and drained.
    pub async fn pop(&self) -> Option<ServerMessage> {
        loop {
            if let Some(msg) = self.try_pop() {
                return Some(msg);
            }
            if self.queue.lock().unwrap().closed {
                return None;
            }
            self.notify.notified().await;
        }
    }

    pub fn try_pop(&self) -> Option<ServerMessage> {
        let mut q = self.queue.lock().unwrap();
        let msg = q.items.pop_front()?;
        if msg.droppable() {
            q.frames -= 1;
        }
        Some(msg)
    }

    pub fn close(&self) {
        self.queue.lock().unwrap().closed = true;
        self.notify.notify_one();
    }

    pub fn len(&self) -> usize {
        self.queue.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frames evicted so far.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}
