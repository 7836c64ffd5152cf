"""Flask lab API exposing the transport and inference tools."""
from __future__ import annotations

import logging
import time
from typing import Any, Dict, List

from flask import Flask, jsonify, request
from flask_cors import CORS

from . import config
from .system_info import get_system_info
from .tools import PRETTY_PRINTERS, TOOL_IMPLS, TOOLS

logger = logging.getLogger(__name__)

app = Flask(__name__)
CORS(app)  # Enable CORS for all routes

# Per-session log of tool calls
RUN_HISTORY: Dict[str, List[Dict[str, Any]]] = {}
MAX_HISTORY = 100


def get_or_create_history(session_id: str) -> List[Dict[str, Any]]:
    if session_id not in RUN_HISTORY:
        RUN_HISTORY[session_id] = []
    return RUN_HISTORY[session_id]


@app.route('/api/tools', methods=['GET'])
def list_tools():
    """Names, descriptions and parameter schemas of every lab tool."""
    return jsonify({
        "status": "success",
        "tools": [
            {
                "name": tool["function"]["name"],
                "description": tool["function"]["description"],
                "parameters": tool["function"]["parameters"],
            }
            for tool in TOOLS
        ],
    })


@app.route('/api/tools/<name>', methods=['POST'])
def call_tool(name: str):
    """Run one tool with the JSON body's ``arguments``."""
    if name not in TOOL_IMPLS:
        return jsonify({"error": f"Unknown tool '{name}'"}), 404

    data = request.get_json(silent=True) or {}
    arguments = data.get("arguments", {})
    if not isinstance(arguments, dict):
        return jsonify({"error": "arguments must be a JSON object"}), 400

    start = time.perf_counter()
    try:
        result = TOOL_IMPLS[name](**arguments)
    except TypeError as e:
        return jsonify({"error": f"Invalid arguments for '{name}': {e}"}), 400
    elapsed = time.perf_counter() - start
    logger.info("Tool %s finished with status %s in %.3fs", name, result.get("status"), elapsed)

    history = get_or_create_history(request.args.get('session_id', 'default'))
    history.append({"tool": name, "status": result.get("status"), "seconds": elapsed})
    del history[:-MAX_HISTORY]

    status_code = 200 if result.get("status") == "success" else 400
    return jsonify({
        "result": result,
        "text": PRETTY_PRINTERS[name](result),
        "timing": {"seconds": elapsed},
    }), status_code


@app.route('/api/history', methods=['GET'])
def history():
    session_id = request.args.get('session_id', 'default')
    return jsonify({"status": "success", "history": get_or_create_history(session_id)})


@app.route('/api/reset', methods=['POST'])
def reset_history():
    """Clear the tool call log of a session."""
    session_id = request.args.get('session_id', 'default')
    RUN_HISTORY.pop(session_id, None)
    return jsonify({"status": "success", "message": "History reset"})


@app.route('/api/system-info', methods=['GET'])
def system_info():
    return jsonify({"status": "success", "info": get_system_info()})


@app.route('/api/health', methods=['GET'])
def health_check():
    """Health check endpoint."""
    return jsonify({"status": "ok"})


def serve(host: str = config.LAB_HOST, port: int = config.LAB_PORT, debug: bool = False) -> None:
    logger.info("Lab API listening on http://%s:%d", host, port)
    app.run(host=host, port=port, debug=debug)


if __name__ == '__main__':
    serve(debug=True)
