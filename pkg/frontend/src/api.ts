// Typed client for the chat service's /v1 HTTP API. All server state lives
// behind these calls; the UI keeps no model logic of its own.

export interface SpanPayload {
  not_found: boolean;
  intervals: [number, number][];
}

export interface TranscriptTurn {
  role: 'user' | 'assistant';
  text: string;
  ecg_refs: string[];
  spans: SpanPayload | null;
}

export interface Transcript {
  session_id: string;
  turns: TranscriptTurn[];
}

export interface MessageReply {
  reply: string;
  spans: SpanPayload | null;
}

export interface PreviewLane {
  lead: string;
  points: [number, number][]; // (t seconds, amplitude), already decimated server-side
}

export interface UploadedEcg {
  ref: string;
  record_id: string;
  duration: number;
  leads: string[];
  preview: PreviewLane[];
  answer?: string;
  spans?: SpanPayload | null;
}

export type UploadFormat = 'interchange-binary' | 'columnar-text';

/** Server error types plus the client-side 'network' kind. */
export type ErrorKind =
  | 'unknown_session'
  | 'unknown_record'
  | 'context_overflow'
  | 'unknown_format'
  | 'empty_upload'
  | 'bad_record'
  | 'network'
  | 'bad_response';

export class ApiError extends Error {
  constructor(
    readonly kind: ErrorKind,
    message: string,
    readonly status?: number,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function toError(resp: Response): Promise<ApiError> {
  let kind: ErrorKind = 'bad_response';
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && body.error) {
      kind = body.error.type;
      message = body.error.message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(kind, message, resp.status);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError('network', `service unreachable: ${String(err)}`);
    }
    if (!resp.ok) throw await toError(resp);
    return (await resp.json()) as T;
  }

  async health(): Promise<boolean> {
    const body = await this.request<{ status: string }>('/healthz');
    return body.status === 'ok';
  }

  async createSession(): Promise<string> {
    const body = await this.request<{ session_id: string }>('/v1/session', {
      method: 'POST',
    });
    return body.session_id;
  }

  getTranscript(sessionId: string): Promise<Transcript> {
    return this.request<Transcript>(`/v1/session/${sessionId}`);
  }

  sendMessage(sessionId: string, text: string, ecgRefs: string[]): Promise<MessageReply> {
    return this.request<MessageReply>(`/v1/session/${sessionId}/message`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text, ecg_refs: ecgRefs }),
    });
  }

  uploadEcg(bytes: BodyInit, format: UploadFormat, question?: string): Promise<UploadedEcg> {
    const params = new URLSearchParams({ format });
    if (question !== undefined) params.set('question', question);
    return this.request<UploadedEcg>(`/v1/ecg?${params}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/octet-stream' },
      body: bytes,
    });
  }
}
