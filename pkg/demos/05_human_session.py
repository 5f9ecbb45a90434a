"""Launch a human-labeling session with the browser client.

Starts the session service on a desk-scale cartpole configuration with a
simulated-label bootstrap, serving the compiled frontend at the same
address. Open the printed URL, watch the two clips, and click your
preference; kill and re-run this script to see the session resume with
every accepted label intact.

Build the client first:  cd frontend && npm install && npm run build
"""

import os
from dataclasses import replace

from prefcut import OracleSpec, cartpole_config
from prefcut.service import serve_session

OUT = os.environ.get("PREFCUT_SESSION_DIR", "./human-session")
UI = os.path.join(os.path.dirname(__file__), "..", "frontend")


def main():
    cfg = cartpole_config(seed=0, gamma=0.4)
    cfg = replace(cfg,
                  oracle=OracleSpec(kind="human"),
                  iterations=10,
                  bootstrap_labels=50,
                  out_dir=OUT)
    ui_dir = UI if os.path.exists(os.path.join(UI, "index.html")) else None
    server, runner = serve_session(cfg, host="127.0.0.1", port=8765,
                                   out_dir=OUT, ui_dir=ui_dir)
    host, port = server.server_address
    print(f"session: http://{host}:{port}   (artifacts in {OUT})")
    if ui_dir is None:
        print("frontend not built; the JSON endpoints still work "
              "(/status, /query, /label, /curve)")
    print("the first 50 labels come from the simulated rational teacher; "
          "after that the browser asks you")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        runner.shutdown()
        print("\nstopped; re-run to resume this session")


if __name__ == "__main__":
    main()
