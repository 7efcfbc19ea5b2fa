/**
 * End-to-end check against the real labeling service: spawn the Python
 * backend on an ephemeral port and drive it with the same ApiClient the
 * browser uses. Covers the full annotate flow, the optimistic-concurrency
 * conflict, and the server-side interval backstop.
 */

import { ChildProcess, spawn } from 'node:child_process';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient, ApiError, ConflictError } from '../src/api.js';

const SERVICE_SCRIPT = `
import tempfile
from pathlib import Path

from whalesift.acquisition import AnonymizedRecord
from whalesift.annotation_service import ServiceConfig, serve
from whalesift.corpus import LabeledVideo, Manifest

corpus = Path(tempfile.mkdtemp(prefix="annotator_ui_it_")) / "corpus"
corpus.mkdir()
manifest = Manifest()
for n, duration in ((1, 30.0), (2, 75.0), (3, 52.0)):
    manifest.add(
        LabeledVideo(
            record=AnonymizedRecord(
                local_id=f"vid_{n:04d}",
                duration_s=duration,
                retrieved_at="2024-05-01T00:00:00Z",
                query="humpback whale",
            )
        )
    )
manifest.save(corpus / "manifest.ndjson")

service = serve(ServiceConfig(corpus_dir=corpus, port=0))
print("SERVICE_URL", service.url, flush=True)
service.serve_forever()
`;

let child: ChildProcess;
let api: ApiClient;

function startService(): Promise<string> {
  return new Promise((resolve, reject) => {
    child = spawn('python3', ['-c', SERVICE_SCRIPT], { stdio: ['ignore', 'pipe', 'pipe'] });
    let out = '';
    let err = '';
    const timer = setTimeout(
      () => reject(new Error(`service did not come up; stderr so far:\n${err}`)),
      15000,
    );
    child.stdout!.on('data', (chunk: Buffer) => {
      out += chunk.toString();
      const match = out.match(/SERVICE_URL (\S+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    child.stderr!.on('data', (chunk: Buffer) => {
      err += chunk.toString();
    });
    child.on('exit', (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early (${code}); stderr:\n${err}`));
    });
  });
}

beforeAll(async () => {
  const url = await startService();
  api = new ApiClient(url);
}, 20000);

afterAll(() => {
  child?.kill();
});

describe('against the real service', () => {
  it('runs the whole annotate flow', async () => {
    // Fresh corpus: three unlabeled videos.
    const queue = await api.listVideos();
    expect(queue.map((t) => t.local_id)).toEqual(['vid_0001', 'vid_0002', 'vid_0003']);
    expect(queue[0].version).toBe(0);

    // Relevant label, then a 12 s interval with the chained version.
    const labeled = await api.submitLabel('vid_0001', 'relevant', 0);
    expect(labeled.label).toBe('relevant');
    expect(labeled.version).toBe(1);

    const marked = await api.submitInterval('vid_0001', 4, 16, labeled.version);
    expect(marked.interval).toEqual({ start_s: 4, end_s: 16 });
    expect(marked.version).toBe(2);

    // A second annotator still holding version 0 conflicts and changes nothing.
    const conflict = await api
      .submitLabel('vid_0001', 'irrelevant', 0)
      .catch((e: unknown) => e);
    expect(conflict).toBeInstanceOf(ConflictError);
    expect((conflict as ConflictError).currentVersion).toBe(2);
    const reloaded = await api.getTask('vid_0001');
    expect(reloaded.label).toBe('relevant');
    expect(reloaded.interval).toEqual({ start_s: 4, end_s: 16 });

    // Server backstop: a 25 s interval is rejected even if a client sent it.
    const tooLong = await api
      .submitInterval('vid_0001', 0, 25, reloaded.version)
      .catch((e: unknown) => e);
    expect(tooLong).toBeInstanceOf(ApiError);
    expect((tooLong as ApiError).status).toBe(422);
    expect((tooLong as ApiError).message).toMatch(/above 20 s/);

    // Irrelevant labeling needs no human interval; the service machine-assigns
    // a 15 s excerpt so downstream frame extraction has a span to decode.
    const irrelevant = await api.submitLabel('vid_0002', 'irrelevant', 0);
    expect(irrelevant.label).toBe('irrelevant');
    expect(irrelevant.interval).not.toBeNull();
    const { start_s, end_s } = irrelevant.interval!;
    expect(end_s - start_s).toBeCloseTo(15, 6);

    // Live counters reflect both writes; one video remains.
    const progress = await api.progress();
    expect(progress).toEqual({ relevant: 1, irrelevant: 1, unlabeled: 1, total: 3 });
    const remaining = await api.listVideos();
    expect(remaining.map((t) => t.local_id)).toEqual(['vid_0003']);
  }, 20000);
});
