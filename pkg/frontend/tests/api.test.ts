import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError, ConflictError, TaskDto } from '../src/api.js';

/** Captures requests and plays back scripted responses. */
function scripted(...responses: Response[]) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetchFn = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    const next = responses.shift();
    if (!next) {
      throw new Error('no scripted response left');
    }
    return next;
  };
  return { calls, fetchFn };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

const task: TaskDto = {
  local_id: 'vid_0001',
  duration_s: 30,
  label: null,
  interval: null,
  version: 0,
  frame_count: null,
  frames: [],
  timestamps_s: null,
};

describe('ApiClient', () => {
  it('lists unlabeled videos by default and unwraps the envelope', async () => {
    const { calls, fetchFn } = scripted(json(200, { videos: [task] }));
    const api = new ApiClient('http://host:1', fetchFn);
    const got = await api.listVideos();
    expect(got).toEqual([task]);
    expect(calls[0].url).toBe('http://host:1/api/videos?status=unlabeled');
    expect(calls[0].init?.method).toBeUndefined(); // GET
  });

  it('passes an explicit status filter through', async () => {
    const { calls, fetchFn } = scripted(json(200, { videos: [] }));
    await new ApiClient('', fetchFn).listVideos('relevant');
    expect(calls[0].url).toBe('/api/videos?status=relevant');
  });

  it('fetches one task without an envelope', async () => {
    const { calls, fetchFn } = scripted(json(200, task));
    const got = await new ApiClient('', fetchFn).getTask('vid_0001');
    expect(got.local_id).toBe('vid_0001');
    expect(calls[0].url).toBe('/api/videos/vid_0001');
  });

  it('POSTs a label with its version and unwraps the task', async () => {
    const labeled = { ...task, label: 'relevant' as const, version: 1 };
    const { calls, fetchFn } = scripted(json(200, { task: labeled }));
    const got = await new ApiClient('', fetchFn).submitLabel('vid_0001', 'relevant', 0);
    expect(got.version).toBe(1);
    expect(calls[0].url).toBe('/api/videos/vid_0001/label');
    expect(calls[0].init?.method).toBe('POST');
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ label: 'relevant', version: 0 });
  });

  it('POSTs an interval as start_s/end_s', async () => {
    const { calls, fetchFn } = scripted(json(200, { task }));
    await new ApiClient('', fetchFn).submitInterval('vid_0001', 4, 16, 1);
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      start_s: 4,
      end_s: 16,
      version: 1,
    });
  });

  it('maps 409 to ConflictError carrying the current version', async () => {
    const { fetchFn } = scripted(
      json(409, { error: 'version conflict', current_version: 7 }),
    );
    const err = await new ApiClient('', fetchFn)
      .submitLabel('vid_0001', 'relevant', 0)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ConflictError);
    expect((err as ConflictError).currentVersion).toBe(7);
  });

  it('maps other error statuses to ApiError with the server message', async () => {
    const { fetchFn } = scripted(
      json(422, { error: 'relevant interval above 20 s (got 25)' }),
    );
    const err = await new ApiClient('', fetchFn)
      .submitInterval('vid_0001', 0, 25, 1)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).message).toMatch(/above 20 s/);
  });

  it('survives a non-JSON error body', async () => {
    const { fetchFn } = scripted(new Response('boom', { status: 500 }));
    const err = await new ApiClient('', fetchFn).progress().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).message).toMatch(/500/);
  });
});
