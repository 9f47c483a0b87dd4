import json, os, csv, io
T, I = "text", "int"
def attr(n, t=T, null=False): return {"name": n, "type": t, "nullable": null}
S = {
 "vehicles": ([attr("vid"), attr("loc"), attr("rid", null=True)], ["vid"]),
 "area_map": ([attr("loc"), attr("area")], ["loc"]),
 "occupied_vehicles": ([attr("vid"), attr("area"), attr("rid")], ["vid"]),
 "unoccupied_vehicles": ([attr("vid"), attr("area")], ["vid"]),
 "reserved_vehicles": ([attr("vid"), attr("area"), attr("rid")], ["vid"]),
 "trips": ([attr("vid"), attr("loc"), attr("rid")], ["vid"]),
 "fleet": ([attr("vid"), attr("area"), attr("rid", null=True), attr("driver", null=True)], ["vid"]),
 "people": ([attr("id", I), attr("name")], ["id"]),
 "R1": ([attr("tid"), attr("id", I), attr("time"), attr("a_type"), attr("location")], ["tid"]),
 "R2": ([attr("tid"), attr("id", I), attr("time"), attr("a_type"), attr("location")], ["tid"]),
}
for v in ["peer1_public", "peer2_public", "peer3_public"]:
    S[v] = ([attr("vehicle_id"), attr("current_area"), attr("request_id", null=True)], ["vehicle_id"])
AREAS = [["Kanda","Tokyo"],["Ueno","Tokyo"],["Shinjuku","Tokyo"],["Makuhari","Chiba"],["Funabashi","Chiba"],
         ["Yokohama","Kanagawa"],["Gion","Kyoto"],["Arashiyama","Kyoto"]]
def fld(x): return "" if x is None else str(x)
def write(d, tables):
    os.makedirs(d, exist_ok=True)
    sch = {"tables": [{"name": n, "attrs": S[n][0], "key": S[n][1]} for n in tables]}
    open(os.path.join(d, "schema.json"), "w").write(json.dumps(sch, indent=2) + "\n")
    for n, rows in tables.items():
        with open(os.path.join(d, n + ".csv"), "w", newline="") as f:
            f.write(",".join(a["name"] for a in S[n][0]) + "\n")
            for r in rows: f.write(",".join(fld(x) for x in r) + "\n")
N = None
write("db/peer1/a", {"vehicles": [["v1","Kanda","r1"],["v2","Ueno",N],["v3","Makuhari",N]], "area_map": AREAS})
write("db/peer1/b", {"vehicles": [["v1","Kanda","r0"]], "area_map": [["Kanda","Tokyo"]]})
write("db/peer1/c", {"vehicles": [["v1","Kanda","r1"],["v2","Ueno",N],["v3","Shinjuku","r3"],["v4","Makuhari",N],
    ["v5","Funabashi",N],["v6","Yokohama","r6"],["v7","Gion",N],["v8","Arashiyama",N]], "area_map": AREAS})
write("db/peer2/a", {"unoccupied_vehicles": [["v2","Osaka"],["v4","Chiba"]], "occupied_vehicles": [["v3","Tokyo","r2"]]})
write("db/peer2/b", {"unoccupied_vehicles": [["v2","Osaka"]], "occupied_vehicles": []})
write("db/peer2/c", {"unoccupied_vehicles": [["w1","Tokyo"],["w2","Tokyo"],["w5","Kanagawa"],["w6","Kyoto"]],
    "occupied_vehicles": [["w3","Chiba","r7"],["w4","Tokyo","r8"]]})
P1A = [["v1","Tokyo","r1"],["v2","Tokyo",N],["v3","Chiba",N]]
P2A = [["v2","Osaka",N],["v3","Tokyo","r2"],["v4","Chiba",N]]
write("db/integrator/a", {"peer1_public": P1A, "peer2_public": P2A})
write("db/integrator/b", {"peer1_public": [["v1","Tokyo","r0"]], "peer2_public": []})
write("db/integrator/c", {"peer1_public": [["v1","Tokyo","r1"],["v2","Tokyo",N],["v4","Chiba",N],["v6","Kanagawa","r6"]],
    "peer2_public": [["w1","Tokyo",N],["w2","Tokyo",N],["w3","Chiba","r7"]]})
P3A = [["x1","Kanagawa",N],["x2","Tokyo","r4"]]
write("db/peer3/a", {"fleet": [["x1","Kanagawa",N,"Sato"],["x2","Tokyo","r4",N]]})
write("db/peer3/b", {"fleet": []})
write("db/peer3/c", {"fleet": [["x1","Kanagawa",N,"Sato"],["x2","Tokyo","r4","Ito"],["x3","Chiba",N,N],["x4","Tokyo",N,"Kato"]]})
write("db/integrator3/a", {"peer1_public": P1A, "peer2_public": P2A, "peer3_public": P3A})
write("db/integrator3/b", {"peer1_public": [], "peer2_public": [["v2","Osaka",N]], "peer3_public": [["v2","Osaka",N]]})
write("db/integrator3/c", {"peer1_public": [["v1","Tokyo","r1"],["v2","Tokyo",N]], "peer2_public": [["w1","Tokyo",N]],
    "peer3_public": [["x1","Kanagawa",N],["x2","Tokyo","r4"],["x3","Chiba",N]]})
write("db/peer1_empty/a", {"vehicles": [["v2","Ueno",N],["v3","Makuhari",N],["v5","Kanda","r4"]],
    "trips": [["v1","Shinjuku","r1"]], "area_map": AREAS})
write("db/peer1_empty/b", {"vehicles": [["v1","Kanda",N]], "trips": [], "area_map": AREAS})
write("db/peer1_empty/c", {"vehicles": [["v2","Ueno",N],["v4","Funabashi",N],["v7","Gion",N],["v5","Kanda","r4"],["v6","Yokohama","r6"]],
    "trips": [["v1","Shinjuku","r1"],["v3","Makuhari","r3"]], "area_map": AREAS})
write("db/peer2_empty/a", {"unoccupied_vehicles": [["w1","Tokyo"],["w2","Chiba"]], "reserved_vehicles": [],
    "occupied_vehicles": [["w3","Tokyo","r7"]]})
write("db/peer2_empty/b", {"unoccupied_vehicles": [], "reserved_vehicles": [["w1","Tokyo","r2"]], "occupied_vehicles": []})
write("db/peer2_empty/c", {"unoccupied_vehicles": [["w1","Tokyo"],["w2","Chiba"],["w4","Kanagawa"]], "reserved_vehicles": [["w5","Tokyo","r9"]],
    "occupied_vehicles": [["w3","Tokyo","r7"],["w6","Chiba","r8"]]})
write("db/keyfree/a", {"people": [[1,"ann"],[2,"bob"]]})
write("lineage/db", {"R1": [["t1",1,"10:00","B","Oike"],["t2",1,"10:30","S","Chionin"],["t3",1,"11:00","S","Yasaka"],["t4",1,"11:30","D","Gion"]],
    "R2": [["t6",101,"10:00","B","Oike"],["t7",101,"11:00","B","Oike"]]})
