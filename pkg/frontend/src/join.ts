// Wiring a screen to the poll loop for one auction. Shared by the app
// shell and by the integration tests, so what the tests drive is exactly
// what the app runs.

import { ServerClock } from "./clock";
import { PollLoop } from "./pollLoop";
import { createAuctioneerConsole, type AuctioneerConsole } from "./screens/auctioneerConsole";
import { createBidderRoom, type BidderRoom } from "./screens/bidderRoom";
import { createObserverRoom, type ObserverRoom } from "./screens/observerRoom";
import type { ApiClient } from "./wire";

export interface JoinBase {
  clock: ServerClock;
  loop: PollLoop;
  leave(): void;
}

export interface SessionInfo {
  api: ApiClient;
  token: string;
  auctionId: string;
}

export function joinAsBidder(
  container: HTMLElement,
  s: SessionInfo,
): JoinBase & { room: BidderRoom } {
  const clock = new ServerClock();
  const room = createBidderRoom(container, {
    clock,
    submitBid: (slotId, amount) =>
      s.api.bid(
        s.token,
        s.auctionId,
        slotId,
        amount,
        loop.cursor,
        clock.synced ? clock.now() : undefined,
      ),
  });
  const loop = new PollLoop({
    api: s.api,
    token: s.token,
    auctionId: s.auctionId,
    clock,
    onView: (view) => room.renderView(view),
    onMessage: (msg) => room.onMessage(msg),
    onStale: (stale) => room.setStale(stale),
  });
  void loop.start();
  return {
    clock,
    loop,
    room,
    leave() {
      loop.stop();
      room.stop();
    },
  };
}

export function joinAsObserver(
  container: HTMLElement,
  s: SessionInfo,
): JoinBase & { room: ObserverRoom } {
  const clock = new ServerClock();
  const room = createObserverRoom(container, { clock });
  const loop = new PollLoop({
    api: s.api,
    token: s.token,
    auctionId: s.auctionId,
    clock,
    onView: (view) => room.renderView(view),
    onMessage: (msg) => room.onMessage(msg),
    onStale: (stale) => room.setStale(stale),
  });
  void loop.start();
  return {
    clock,
    loop,
    room,
    leave() {
      loop.stop();
      room.stop();
    },
  };
}

export function joinAsAuctioneer(
  container: HTMLElement,
  s: SessionInfo,
): JoinBase & { room: AuctioneerConsole } {
  const clock = new ServerClock();
  const room = createAuctioneerConsole(container, {
    clock,
    actions: {
      ban: (personId) => s.api.adminBan(s.token, s.auctionId, personId),
      admit: (personId) => s.api.adminAdmit(s.token, s.auctionId, personId),
      prolong: (deltaMs) => s.api.adminProlong(s.token, s.auctionId, deltaMs),
      cancel: () => s.api.adminCancel(s.token, s.auctionId),
    },
  });
  const loop = new PollLoop({
    api: s.api,
    token: s.token,
    auctionId: s.auctionId,
    clock,
    onView: (view) => {
      room.renderView(view);
      void s.api
        .adminStatus(s.token, s.auctionId)
        .then((status) => room.renderParticipants(status))
        .catch(() => undefined); // the next poll retries; the ladder is current regardless
    },
    onMessage: (msg) => room.onMessage(msg),
    onStale: (stale) => room.setStale(stale),
  });
  void loop.start();
  return {
    clock,
    loop,
    room,
    leave() {
      loop.stop();
      room.stop();
    },
  };
}
