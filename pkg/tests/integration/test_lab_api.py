#!/usr/bin/env python
"""
Integration tests for the lab API.
Tests the API endpoints and tool dispatch through the Flask test client.
"""
import json
import os
import sys
import unittest

import pytest

# Add the project root to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from genprior import app as lab_app
from genprior.tools import TOOLS


@pytest.mark.integration
@pytest.mark.api
class TestLabAPI(unittest.TestCase):
    """Test cases for the lab API."""

    def setUp(self):
        """Set up the test client and clear the call history."""
        lab_app.app.config['TESTING'] = True
        self.client = lab_app.app.test_client()
        lab_app.RUN_HISTORY.clear()

    def test_health_endpoint(self):
        """Test that the health endpoint returns a 200 status code."""
        response = self.client.get('/api/health')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(json.loads(response.data)["status"], "ok")

    def test_tools_endpoint(self):
        """Every registered tool is listed with its schema."""
        response = self.client.get('/api/tools')
        data = json.loads(response.data)
        self.assertEqual(response.status_code, 200)
        self.assertEqual([t["name"] for t in data["tools"]], [t["function"]["name"] for t in TOOLS])
        self.assertTrue(all("parameters" in t for t in data["tools"]))

    def test_wasserstein_call(self):
        """Test a successful tool call."""
        response = self.client.post('/api/tools/wasserstein', json={
            "arguments": {"points_a": [[0, 0]], "points_b": [[3, 4]], "p": 2}
        })
        data = json.loads(response.data)
        self.assertEqual(response.status_code, 200)
        self.assertEqual(data["result"]["status"], "success")
        self.assertAlmostEqual(data["result"]["distance"], 5.0)
        self.assertIn("W2 distance", data["text"])
        self.assertGreaterEqual(data["timing"]["seconds"], 0.0)

    def test_darcy_call(self):
        response = self.client.post('/api/tools/darcy_forward', json={
            "arguments": {"m": 8, "observation_count": 4}
        })
        data = json.loads(response.data)
        self.assertEqual(response.status_code, 200)
        self.assertEqual(len(data["result"]["values"]), 4)

    def test_tool_errors(self):
        """Unknown tools, malformed arguments and failing tools."""
        response = self.client.post('/api/tools/nonexistent', json={"arguments": {}})
        self.assertEqual(response.status_code, 404)
        self.assertIn("error", json.loads(response.data))

        response = self.client.post('/api/tools/wasserstein', json={"arguments": [1, 2]})
        self.assertEqual(response.status_code, 400)

        response = self.client.post('/api/tools/wasserstein', json={"arguments": {"points_a": [[0]]}})
        self.assertEqual(response.status_code, 400)
        self.assertIn("Invalid arguments", json.loads(response.data)["error"])

        response = self.client.post('/api/tools/wasserstein', json={
            "arguments": {"points_a": [[0, 0]], "points_b": [[1, 2, 3]]}
        })
        data = json.loads(response.data)
        self.assertEqual(response.status_code, 400)
        self.assertEqual(data["result"]["status"], "error")
        self.assertEqual(data["text"], data["result"]["message"])

    def test_history_and_reset(self):
        """Calls are logged per session and the log can be reset."""
        for _ in range(2):
            self.client.post('/api/tools/fit_slope?session_id=abc',
                             json={"arguments": {"xs": [1, 2, 4], "ys": [1, 4, 16]}})
        self.client.post('/api/tools/fit_slope', json={"arguments": {"xs": [1], "ys": [1]}})

        data = json.loads(self.client.get('/api/history?session_id=abc').data)
        self.assertEqual([h["tool"] for h in data["history"]], ["fit_slope", "fit_slope"])
        self.assertEqual(data["history"][0]["status"], "success")

        data = json.loads(self.client.get('/api/history').data)
        self.assertEqual(data["history"][0]["status"], "error")

        response = self.client.post('/api/reset?session_id=abc')
        self.assertEqual(json.loads(response.data)["status"], "success")
        self.assertEqual(json.loads(self.client.get('/api/history?session_id=abc').data)["history"], [])

    def test_system_info_endpoint(self):
        response = self.client.get('/api/system-info')
        data = json.loads(response.data)
        self.assertEqual(response.status_code, 200)
        self.assertIn("python_version", data["info"])
        self.assertIn("numpy", data["info"]["packages"])


@pytest.mark.integration
@pytest.mark.api
def test_exact_distance_between_diracs(flask_test_client, diracs):
    a, b = diracs
    for p in (1, 2):
        response = flask_test_client.post('/api/tools/wasserstein', json={
            "arguments": {"points_a": a.points.tolist(), "points_b": b.points.tolist(), "p": p}
        })
        assert response.status_code == 200
        assert response.get_json()["result"]["distance"] == pytest.approx(5.0)


@pytest.mark.integration
@pytest.mark.api
def test_sinkhorn_divergence_of_a_cloud_with_itself(flask_test_client, gaussian_clouds):
    cloud, _ = gaussian_clouds
    points = cloud.points.tolist()
    response = flask_test_client.post('/api/tools/sinkhorn_divergence', json={
        "arguments": {"points_a": points, "points_b": points, "epsilon": 0.5}
    })
    data = response.get_json()
    assert response.status_code == 200
    assert abs(data["result"]["divergence"]) < 1e-8
    assert data["text"].startswith("Sinkhorn divergence")


if __name__ == '__main__':
    unittest.main()
