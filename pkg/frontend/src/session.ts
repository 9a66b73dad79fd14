// Conversation state for one chat session. The transcript is never edited
// locally: every change round-trips through the service and is re-fetched,
// so what the panel shows is exactly what GET /v1/session/{id} returns.

import { ApiClient, ApiError, Transcript, UploadFormat, UploadedEcg } from './api.js';

/** Upper bound on ECGs attached to a single message. */
export const MAX_ATTACHMENTS = 6;

export interface FailedSend {
  text: string;
  ecgRefs: string[];
}

export function displayTurnText(text: string): string {
  return text.trim() === '' ? '(empty reply)' : text;
}

export class SessionController {
  private sessionIdState: string | null = null;
  private transcriptState: Transcript | null = null;
  private attachmentsState: string[] = [];
  private inFlight = false;
  private failed: FailedSend | null = null;
  private noticeState: string | null = null;
  /** Uploaded records by ref, for previews and the attachment picker. */
  readonly library = new Map<string, UploadedEcg>();

  constructor(private readonly api: ApiClient) {}

  get sessionId(): string | null {
    return this.sessionIdState;
  }

  get transcript(): Transcript | null {
    return this.transcriptState;
  }

  get attachments(): readonly string[] {
    return this.attachmentsState;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  /** The send that failed on a network error, ready for retry(). */
  get retryable(): FailedSend | null {
    return this.failed;
  }

  /** Human-readable notice (context overflow), or null. */
  get notice(): string | null {
    return this.noticeState;
  }

  async open(): Promise<void> {
    this.sessionIdState = await this.api.createSession();
    this.transcriptState = await this.api.getTranscript(this.sessionIdState);
  }

  /** Re-fetch the authoritative transcript. */
  async refresh(): Promise<void> {
    if (this.sessionIdState === null) return;
    this.transcriptState = await this.api.getTranscript(this.sessionIdState);
  }

  async upload(bytes: BodyInit, format: UploadFormat): Promise<UploadedEcg> {
    const up = await this.api.uploadEcg(bytes, format);
    this.library.set(up.ref, up);
    return up;
  }

  /** Attach a record to the next message. False when the ref is already
   * attached or the composer is full. */
  attach(ref: string): boolean {
    if (this.attachmentsState.length >= MAX_ATTACHMENTS) return false;
    if (this.attachmentsState.includes(ref)) return false;
    this.attachmentsState.push(ref);
    return true;
  }

  detach(ref: string): void {
    this.attachmentsState = this.attachmentsState.filter((r) => r !== ref);
  }

  /**
   * Send one message. Only one may be in flight per session; a concurrent
   * call throws immediately. Network failures park the message in
   * `retryable`; a context overflow sets `notice`. Both resolve normally so
   * the panel can render the state.
   */
  async send(text: string, refs?: string[]): Promise<void> {
    if (this.sessionIdState === null) {
      throw new Error('no open session');
    }
    if (this.inFlight) {
      throw new Error('a message is already in flight for this session');
    }
    const ecgRefs = refs ?? [...this.attachmentsState];
    this.inFlight = true;
    this.noticeState = null;
    try {
      await this.api.sendMessage(this.sessionIdState, text, ecgRefs);
      this.failed = null;
      this.attachmentsState = [];
      // no optimistic append: the service owns the transcript
      this.transcriptState = await this.api.getTranscript(this.sessionIdState);
    } catch (err) {
      if (err instanceof ApiError && err.kind === 'context_overflow') {
        this.noticeState = `conversation exceeds the model context; the message was not sent (${err.message})`;
        this.failed = null;
      } else if (err instanceof ApiError && err.kind === 'network') {
        this.failed = { text, ecgRefs };
      } else {
        throw err;
      }
    } finally {
      this.inFlight = false;
    }
  }

  /** Resend the message that failed on a network error. */
  async retry(): Promise<void> {
    const f = this.failed;
    if (f === null) return;
    await this.send(f.text, f.ecgRefs);
  }
}
