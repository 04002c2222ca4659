//! The hold queue for delayed submissions.
//!
//! When a job is delayed, it becomes the head of a hold episode; everything
//! arriving before the release time joins behind it in FCFS order. At the
//! release time the head goes out and the followers keep their original
//! inter-arrival offsets, so the stream reaching the scheduler preserves
//! the submission pattern shifted as a block.

/// A job released from the hold queue with its computed submission time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release<T> {
    pub job: T,
    pub submit_at: i64,
    pub original_submit: i64,
}

#[derive(Debug, Clone)]
pub struct HoldQueue<T> {
    head: (T, i64),
    release_at: i64,
    followers: Vec<(T, i64)>,
}

impl<T> HoldQueue<T> {
    /// Open an episode: `head` was originally submitted at `head_submit`
    /// and will reach the scheduler at `release_at`.
    pub fn new(head: T, head_submit: i64, release_at: i64) -> Self {
        HoldQueue {
            head: (head, head_submit),
            release_at,
            followers: Vec::new(),
        }
    }

    pub fn release_time(&self) -> i64 {
        self.release_at
    }

    /// Number of jobs currently held, head included.
    pub fn len(&self) -> usize {
        1 + self.followers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Enqueue a job that arrived during the episode.
    pub fn enqueue(&mut self, job: T, original_submit: i64) {
        self.followers.push((job, original_submit));
    }

    /// Close the episode: the head is released at the episode's release
    /// time and every follower keeps its offset from the head's original
    /// submission.
    pub fn release(self) -> Vec<Release<T>> {
        let head_submit = self.head.1;
        let release_at = self.release_at;
        let mut out = Vec::with_capacity(1 + self.followers.len());
        out.push(Release {
            job: self.head.0,
            submit_at: release_at,
            original_submit: head_submit,
        });
        for (job, orig) in self.followers {
            out.push(Release {
                job,
                submit_at: release_at + (orig - head_submit),
                original_submit: orig,
            });
        }
        out
    }
}
