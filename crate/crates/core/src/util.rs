use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding concurrent in-flight requests.
#[derive(Debug)]
pub(crate) struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

pub(crate) struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub(crate) fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.permits.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.cv.notify_one();
    }
}

/// Map `f` over `items` on up to `workers` scoped threads, keeping input order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}

/// Whitespace-separated word count.
pub(crate) fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub(crate) fn truncate_chars(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

/// Split text into sentence-like pieces. Pieces break after `.`, `!` or `?`
/// followed by whitespace, and at `"; "`. Each piece is trimmed.
pub(crate) fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut pieces = Vec::new();
    let mut cur = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next_ws = chars.get(i + 1).is_some_and(|n| n.is_whitespace());
        if c == ';' && next_ws {
            pieces.push(std::mem::take(&mut cur));
            i += 1;
            continue;
        }
        cur.push(c);
        if matches!(c, '.' | '!' | '?') && next_ws {
            pieces.push(std::mem::take(&mut cur));
        }
        i += 1;
    }
    pieces.push(cur);
    pieces
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

/// Join pieces so that [`split_sentences`] recovers them exactly.
pub(crate) fn join_sentences<S: AsRef<str>>(pieces: &[S]) -> String {
    let mut out = String::new();
    for (i, p) in pieces.iter().enumerate() {
        let p = p.as_ref();
        if i > 0 {
            let prev_terminal = out.ends_with(['.', '!', '?']);
            out.push_str(if prev_terminal { " " } else { "; " });
        }
        out.push_str(p);
    }
    out
}

/// Unique pieces of all inputs in first-seen order, joined.
pub(crate) fn fuse_unique<S: AsRef<str>>(texts: &[S]) -> String {
    let mut seen = std::collections::HashSet::new();
    let mut pieces = Vec::new();
    for t in texts {
        for p in split_sentences(t.as_ref()) {
            if seen.insert(p.clone()) {
                pieces.push(p);
            }
        }
    }
    join_sentences(&pieces)
}
