// App shell: session state, hash routing, and screen switching. The base
// URL is the page's own origin unless ?api=... points elsewhere.

import { joinAsAuctioneer, joinAsBidder, joinAsObserver } from "./join";
import { createLobby } from "./screens/lobby";
import { createLogin } from "./screens/login";
import { createSetupWizard } from "./screens/setupWizard";
import { clear, el } from "./screens/dom";
import { ApiClient, ApiError, type AuctionRow } from "./wire";

interface Session {
  token: string;
  personId: string;
  serverTimeAtLogin: number;
  localTimeAtLogin: number;
}

function baseUrl(): string {
  return new URLSearchParams(location.search).get("api") ?? "";
}

function start(): void {
  const api = new ApiClient(baseUrl());
  const outlet = document.getElementById("app") as HTMLElement;
  let session: Session | null = null;
  let active: { leave(): void } | null = null;

  const switchTo = (render: (container: HTMLElement) => void) => {
    active?.leave();
    active = null;
    clear(outlet);
    render(outlet);
  };

  const showLogin = () => {
    switchTo((container) => {
      const screen = createLogin(container, {
        onSubmit(username, password) {
          api
            .login(username, password)
            .then((reply) => {
              session = {
                token: reply.auth_token,
                personId: reply.person_id,
                serverTimeAtLogin: reply.server_time,
                localTimeAtLogin: Date.now(),
              };
              location.hash = "#lobby";
            })
            .catch((err: unknown) => {
              screen.showError(err instanceof ApiError ? err.code : String(err));
            });
        },
      });
    });
  };

  const showLobby = () => {
    if (session === null) {
      location.hash = "#login";
      return;
    }
    const current = session;
    switchTo((container) => {
      const lobby = createLobby(container, {
        onJoin(row: AuctionRow) {
          location.hash = `#auction/${encodeURIComponent(row.auction_id)}/${row.role}`;
        },
        onSetup() {
          location.hash = "#setup";
        },
      });
      api
        .listAuctions(current.token)
        .then((reply) => lobby.render(reply.auctions))
        .catch(() => {
          session = null;
          location.hash = "#login";
        });
    });
  };

  const showRoom = (auctionId: string, role: string) => {
    if (session === null) {
      location.hash = "#login";
      return;
    }
    const info = { api, token: session.token, auctionId };
    switchTo((container) => {
      const back = el("button", { type: "button", class: "back" }, "← lobby");
      back.addEventListener("click", () => {
        location.hash = "#lobby";
      });
      container.append(back);
      if (role === "bidder") {
        active = joinAsBidder(container, info);
      } else if (role === "auctioneer") {
        active = joinAsAuctioneer(container, info);
      } else {
        active = joinAsObserver(container, info);
      }
    });
  };

  const showSetup = () => {
    if (session === null) {
      location.hash = "#login";
      return;
    }
    const current = session;
    switchTo((container) => {
      const wizard = createSetupWizard(container, {
        serverNow: () =>
          current.serverTimeAtLogin + (Date.now() - current.localTimeAtLogin),
        onCreate(payload) {
          api
            .createAuction(current.token, payload)
            .then((reply) => wizard.showResult(`created ${reply.auction_id}`))
            .catch((err: unknown) => {
              wizard.showResult(err instanceof ApiError ? err.code : String(err));
            });
        },
      });
    });
  };

  const route = () => {
    const hash = location.hash || "#login";
    const roomMatch = /^#auction\/([^/]+)\/([^/]+)$/.exec(hash);
    if (roomMatch) {
      showRoom(decodeURIComponent(roomMatch[1] as string), roomMatch[2] as string);
    } else if (hash === "#lobby") {
      showLobby();
    } else if (hash === "#setup") {
      showSetup();
    } else {
      showLogin();
    }
  };

  window.addEventListener("hashchange", route);
  route();
}

start();
