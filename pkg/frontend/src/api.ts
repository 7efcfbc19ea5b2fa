/**
 * Typed client for the labeling service REST API.
 *
 * Endpoints:
 * - GET  /api/videos?status=...            -> { videos: TaskDto[] }
 * - GET  /api/videos/{id}                  -> TaskDto
 * - POST /api/videos/{id}/label            -> { task: TaskDto }
 * - POST /api/videos/{id}/interval         -> { task: TaskDto }
 * - GET  /api/progress                     -> ProgressDto
 *
 * Every mutation carries the version the client last saw; a stale version
 * comes back as 409 and is surfaced as ConflictError so the caller can
 * reload the task instead of overwriting someone else's work.
 */

export type LabelName = 'relevant' | 'irrelevant';

export interface IntervalDto {
  start_s: number;
  end_s: number;
}

export interface TaskDto {
  local_id: string;
  duration_s: number;
  label: LabelName | null;
  interval: IntervalDto | null;
  version: number;
  frame_count: number | null;
  /** Frame image URLs, relative to the service origin. */
  frames: string[];
  /** Per-frame timestamps in seconds, when the frame cache knows them. */
  timestamps_s: number[] | null;
}

export interface ProgressDto {
  relevant: number;
  irrelevant: number;
  unlabeled: number;
  total: number;
}

export type TaskStatus = 'unlabeled' | 'labeled' | 'relevant' | 'irrelevant' | 'all';

/** Any non-2xx response the service explained with an error body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

/** 409: someone else wrote this task since we read it. */
export class ConflictError extends ApiError {
  constructor(readonly currentVersion: number) {
    super(409, 'version conflict');
    this.name = 'ConflictError';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Narrow interface the store depends on; ApiClient is the real thing. */
export interface AnnotationApi {
  listVideos(status?: TaskStatus): Promise<TaskDto[]>;
  getTask(localId: string): Promise<TaskDto>;
  submitLabel(localId: string, label: LabelName, version: number): Promise<TaskDto>;
  submitInterval(
    localId: string,
    startS: number,
    endS: number,
    version: number,
  ): Promise<TaskDto>;
  progress(): Promise<ProgressDto>;
}

export class ApiClient implements AnnotationApi {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl = '',
    fetchFn?: FetchLike,
  ) {
    // Bind lazily so a browser fetch keeps its window receiver.
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  async listVideos(status: TaskStatus = 'unlabeled'): Promise<TaskDto[]> {
    const body = await this.request(`/api/videos?status=${status}`);
    return (body as { videos: TaskDto[] }).videos;
  }

  async getTask(localId: string): Promise<TaskDto> {
    return (await this.request(`/api/videos/${localId}`)) as TaskDto;
  }

  async submitLabel(localId: string, label: LabelName, version: number): Promise<TaskDto> {
    const body = await this.request(`/api/videos/${localId}/label`, { label, version });
    return (body as { task: TaskDto }).task;
  }

  async submitInterval(
    localId: string,
    startS: number,
    endS: number,
    version: number,
  ): Promise<TaskDto> {
    const body = await this.request(`/api/videos/${localId}/interval`, {
      start_s: startS,
      end_s: endS,
      version,
    });
    return (body as { task: TaskDto }).task;
  }

  async progress(): Promise<ProgressDto> {
    return (await this.request('/api/progress')) as ProgressDto;
  }

  /** GET when payload is undefined, POST json otherwise; throws ApiError/ConflictError. */
  private async request(path: string, payload?: unknown): Promise<unknown> {
    const init: RequestInit =
      payload === undefined
        ? {}
        : {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(payload),
          };
    const response = await this.fetchFn(this.baseUrl + path, init);

    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // Non-JSON error bodies fall through to the status-based error below.
    }

    if (response.ok) {
      return body;
    }
    const record = (body ?? {}) as Record<string, unknown>;
    if (response.status === 409 && typeof record.current_version === 'number') {
      throw new ConflictError(record.current_version);
    }
    const message =
      typeof record.error === 'string' ? record.error : `request failed (${response.status})`;
    throw new ApiError(response.status, message);
  }
}
