import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api';
import { MAX_ATTACHMENTS, SessionController, displayTurnText } from '../src/session';
import { MockService } from './mock-service';

function makeController(service: MockService): SessionController {
  return new SessionController(new ApiClient('http://svc', service.fetch));
}

describe('conversation flow', () => {
  it('three scripted turns produce exactly the service transcript', async () => {
    const service = new MockService();
    service.replies = [
      { reply: 'sinus rhythm with ectopy .', spans: null },
      { reply: 'Duration: 1.9s-3.7s', spans: { not_found: false, intervals: [[1.9, 3.7]] } },
      { reply: 'Not Found', spans: { not_found: true, intervals: [] } },
    ];
    const controller = makeController(service);
    await controller.open();
    await controller.send('Tell me about this recording .');
    await controller.send('Where is the ectopy ?');
    await controller.send('Any conduction block ?');

    expect(controller.transcript).toEqual(service.transcriptBody('s0001'));
    expect(controller.transcript!.turns.map((t) => t.role)).toEqual([
      'user', 'assistant', 'user', 'assistant', 'user', 'assistant',
    ]);
    expect(controller.transcript!.turns[3]!.spans).toEqual({
      not_found: false,
      intervals: [[1.9, 3.7]],
    });
    expect(controller.transcript!.turns[5]!.spans).toEqual({
      not_found: true,
      intervals: [],
    });
  });

  it('shows the server-side text verbatim, never its own copy of the input', async () => {
    const service = new MockService();
    service.normalize = (text) => `${text.trim().toLowerCase()} .`;
    const controller = makeController(service);
    await controller.open();
    await controller.send('  WHAT IS THIS  ');

    // the user turn is whatever the service stored, proving a re-fetch
    expect(controller.transcript!.turns[0]!.text).toBe('what is this .');
    expect(service.getCount).toBeGreaterThanOrEqual(2); // open + after send
  });

  it('renders a visible placeholder for an empty reply', async () => {
    const service = new MockService();
    service.replies = [{ reply: '', spans: null }];
    const controller = makeController(service);
    await controller.open();
    await controller.send('hello ?');

    const last = controller.transcript!.turns.at(-1)!;
    expect(last.text).toBe('');
    expect(displayTurnText(last.text)).toBe('(empty reply)');
    expect(displayTurnText('fine')).toBe('fine');
  });

  it('allows only one in-flight message per session', async () => {
    const service = new MockService();
    let release!: () => void;
    service.gate = new Promise((resolve) => {
      release = resolve;
    });
    const controller = makeController(service);
    await controller.open();

    const first = controller.send('one');
    expect(controller.busy).toBe(true);
    await expect(controller.send('two')).rejects.toThrow(/already in flight/);
    release();
    await first;

    expect(controller.busy).toBe(false);
    expect(service.posts.map((p) => p.text)).toEqual(['one']);
    service.gate = null;
    await controller.send('two');
    expect(service.posts.map((p) => p.text)).toEqual(['one', 'two']);
  });
});

describe('attachments', () => {
  it('caps the composer at six ECGs and rejects the seventh', async () => {
    const service = new MockService();
    const controller = makeController(service);
    await controller.open();
    const refs: string[] = [];
    for (let i = 0; i < 7; i++) {
      const up = await controller.upload(new Uint8Array([1, 2, 3]), 'interchange-binary');
      refs.push(up.ref);
    }
    for (let i = 0; i < 6; i++) {
      expect(controller.attach(refs[i]!)).toBe(true);
    }
    expect(controller.attach(refs[6]!)).toBe(false);
    expect(controller.attachments).toHaveLength(MAX_ATTACHMENTS);
    expect(controller.attach(refs[0]!)).toBe(false); // duplicates rejected too
  });

  it('a removed attachment is absent from the sent message', async () => {
    const service = new MockService();
    const controller = makeController(service);
    await controller.open();
    const a = await controller.upload(new Uint8Array([1]), 'interchange-binary');
    const b = await controller.upload(new Uint8Array([2]), 'interchange-binary');
    controller.attach(a.ref);
    controller.attach(b.ref);
    controller.detach(a.ref);
    await controller.send('compare these');

    expect(service.posts[0]!.ecg_refs).toEqual([b.ref]);
    expect(controller.attachments).toHaveLength(0); // cleared after a send
  });
});

describe('failure handling', () => {
  it('keeps a retry affordance after a network failure', async () => {
    const service = new MockService();
    const controller = makeController(service);
    await controller.open();
    await controller.send('first');
    const turnsBefore = controller.transcript!.turns.length;

    service.failNext = 'network';
    await controller.send('second');
    expect(controller.retryable).toEqual({ text: 'second', ecgRefs: [] });
    expect(controller.transcript!.turns).toHaveLength(turnsBefore);

    await controller.retry();
    expect(controller.retryable).toBeNull();
    expect(service.posts.map((p) => p.text)).toEqual(['first', 'second']);
    expect(controller.transcript!.turns).toHaveLength(turnsBefore + 2);
  });

  it('turns a context overflow into a truncation notice', async () => {
    const service = new MockService();
    const controller = makeController(service);
    await controller.open();
    service.failNext = 'overflow';
    await controller.send('a very long question');

    expect(controller.notice).toMatch(/exceeds the model context/);
    expect(controller.retryable).toBeNull();
    expect(controller.transcript!.turns).toHaveLength(0);
  });
});
