/**
 * Client-side interval rules, mirroring what the service enforces:
 * a relevant video's occurrence interval must run 10-20 seconds.
 *
 * The widget clamps drags into a valid span whenever one exists, so the
 * UI never submits an interval the server would reject; server-side
 * validation stays as a backstop.
 */

export const MIN_SPAN_S = 10;
export const MAX_SPAN_S = 20;

export interface Span {
  startS: number;
  endS: number;
}

export function spanLength(span: Span): number {
  return span.endS - span.startS;
}

function ulp(x: number): number {
  return Math.max(Number.EPSILON * Math.abs(x), Number.MIN_VALUE);
}

/**
 * Nudge the endpoints by single ulps until the measured length obeys the
 * rules. `start + 20 - start` can overshoot 20 by one bit, and the service
 * re-measures with the same f64 subtraction, so "close enough" is not:
 * the submitted span must pass the exact check.
 */
function settle(startS: number, endS: number, durationS: number): Span {
  let start = startS;
  let end = endS;
  for (let i = 0; i < 4 && end - start > MAX_SPAN_S; i++) {
    end -= ulp(end);
  }
  for (let i = 0; i < 4 && end - start < MIN_SPAN_S; i++) {
    if (end + ulp(end) <= durationS) {
      end += ulp(end);
    } else if (start - ulp(start) >= 0) {
      start -= ulp(start);
    }
  }
  return { startS: start, endS: end };
}

/**
 * Best-effort valid span from a raw drag: endpoints are ordered and kept
 * inside [0, durationS], then the length is pushed into [10, 20] by moving
 * the end (and sliding the start back when the video's tail is in the way).
 *
 * Videos shorter than 10 s admit no valid span; the full video is returned
 * and validateSpan reports the violation.
 */
export function clampSpan(rawStartS: number, rawEndS: number, durationS: number): Span {
  let start = Math.min(rawStartS, rawEndS);
  let end = Math.max(rawStartS, rawEndS);

  start = Math.min(Math.max(start, 0), durationS);
  end = Math.min(Math.max(end, 0), durationS);

  if (durationS < MIN_SPAN_S) {
    return { startS: 0, endS: durationS };
  }

  if (end - start > MAX_SPAN_S) {
    end = start + MAX_SPAN_S;
  } else if (end - start < MIN_SPAN_S) {
    end = start + MIN_SPAN_S;
    if (end > durationS) {
      // Not enough room to the right; slide the whole span left.
      end = durationS;
      start = end - MIN_SPAN_S;
    }
  }
  return settle(start, end, durationS);
}

/** Null when the span is submittable, otherwise a human-readable violation. */
export function validateSpan(span: Span, durationS: number): string | null {
  if (span.endS <= span.startS) {
    return 'interval must end after it starts';
  }
  if (span.startS < 0 || span.endS > durationS) {
    return 'interval must lie inside the video';
  }
  const length = spanLength(span);
  if (length < MIN_SPAN_S) {
    return `interval must run at least ${MIN_SPAN_S} s (got ${length.toFixed(1)} s)`;
  }
  if (length > MAX_SPAN_S) {
    return `interval must run at most ${MAX_SPAN_S} s (got ${length.toFixed(1)} s)`;
  }
  return null;
}

/** Shift a span by wholeSeconds, keeping its length, staying inside the video. */
export function shiftSpan(span: Span, deltaS: number, durationS: number): Span {
  const length = spanLength(span);
  let start = span.startS + deltaS;
  start = Math.min(Math.max(start, 0), Math.max(durationS - length, 0));
  return settle(start, start + length, durationS);
}

/** Grow or shrink the span's end by deltaS, keeping the start pinned. */
export function resizeSpan(span: Span, deltaS: number, durationS: number): Span {
  const start = span.startS;
  const end = Math.min(
    Math.max(span.endS + deltaS, start + MIN_SPAN_S),
    start + MAX_SPAN_S,
    durationS,
  );
  return settle(start, end, durationS);
}
