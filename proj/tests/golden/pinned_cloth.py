# Scene script generated by sketchplay-emitter 0.1.0 for the Blender 4.x Python API.
# Run with: blender --background --python <this file>
import bpy
from mathutils import Vector

scene = bpy.context.scene
bpy.ops.object.select_all(action="SELECT")
bpy.ops.object.delete(use_global=False)
for mesh in list(bpy.data.meshes):
    bpy.data.meshes.remove(mesh)
for material in list(bpy.data.materials):
    bpy.data.materials.remove(material)
if scene.rigidbody_world is None:
    bpy.ops.rigidbody.world_add()
objects = {}


def make_mesh(name, vertices, faces):
    mesh = bpy.data.meshes.new(name)
    mesh.from_pydata(vertices, [], faces)
    mesh.update()
    obj = bpy.data.objects.new(name, mesh)
    scene.collection.objects.link(obj)
    return obj


def select_only(obj):
    bpy.ops.object.select_all(action="DESELECT")
    obj.select_set(True)
    bpy.context.view_layer.objects.active = obj


def launch(obj, velocity):
    # Kinematic handoff: animate one frame at the target velocity, then let
    # the rigid body solver take over with the velocity it inherited.
    start = obj.location.copy()
    obj.rigid_body.kinematic = True
    obj.keyframe_insert("location", frame=1)
    obj.rigid_body.keyframe_insert("kinematic", frame=1)
    obj.location = start + Vector(velocity) / scene.render.fps
    obj.keyframe_insert("location", frame=2)
    obj.rigid_body.kinematic = False
    obj.rigid_body.keyframe_insert("kinematic", frame=2)
    obj.location = start

bpy.ops.mesh.primitive_plane_add(size=100, location=(0, 0, 0))
ground = bpy.context.active_object
ground.name = "ground"
bpy.ops.rigidbody.object_add(type="PASSIVE")
ground.rigid_body.friction = 0.5
ground.rigid_body.restitution = 0
ground.modifiers.new("Collision", "COLLISION")

# --- SECTION 1: MATERIAL ASSIGNMENT ---
# object: banner
vertices = [
    (-0.175, 0.175, 0),
    (-0.125, 0.175, 0),
    (-0.075, 0.175, 0),
    (-0.025, 0.175, 0),
    (0.025, 0.175, 0),
    (0.075, 0.175, 0),
    (0.125, 0.175, 0),
    (0.175, 0.175, 0),
    (-0.175, 0.125, 0),
    (-0.125, 0.125, 0),
    (-0.075, 0.125, 0),
    (-0.025, 0.125, 0),
    (0.025, 0.125, 0),
    (0.075, 0.125, 0),
    (0.125, 0.125, 0),
    (0.175, 0.125, 0),
    (-0.175, 0.075, 0),
    (-0.125, 0.075, 0),
    (-0.075, 0.075, 0),
    (-0.025, 0.075, 0),
    (0.025, 0.075, 0),
    (0.075, 0.075, 0),
    (0.125, 0.075, 0),
    (0.175, 0.075, 0),
    (-0.175, 0.025, 0),
    (-0.125, 0.025, 0),
    (-0.075, 0.025, 0),
    (-0.025, 0.025, 0),
    (0.025, 0.025, 0),
    (0.075, 0.025, 0),
    (0.125, 0.025, 0),
    (0.175, 0.025, 0),
    (-0.175, -0.025, 0),
    (-0.125, -0.025, 0),
    (-0.075, -0.025, 0),
    (-0.025, -0.025, 0),
    (0.025, -0.025, 0),
    (0.075, -0.025, 0),
    (0.125, -0.025, 0),
    (0.175, -0.025, 0),
    (-0.175, -0.075, 0),
    (-0.125, -0.075, 0),
    (-0.075, -0.075, 0),
    (-0.025, -0.075, 0),
    (0.025, -0.075, 0),
    (0.075, -0.075, 0),
    (0.125, -0.075, 0),
    (0.175, -0.075, 0),
    (-0.175, -0.125, 0),
    (-0.125, -0.125, 0),
    (-0.075, -0.125, 0),
    (-0.025, -0.125, 0),
    (0.025, -0.125, 0),
    (0.075, -0.125, 0),
    (0.125, -0.125, 0),
    (0.175, -0.125, 0),
    (-0.175, -0.175, 0),
    (-0.125, -0.175, 0),
    (-0.075, -0.175, 0),
    (-0.025, -0.175, 0),
    (0.025, -0.175, 0),
    (0.075, -0.175, 0),
    (0.125, -0.175, 0),
    (0.175, -0.175, 0),
]
faces = [
    (0, 8, 9, 1),
    (1, 9, 10, 2),
    (2, 10, 11, 3),
    (3, 11, 12, 4),
    (4, 12, 13, 5),
    (5, 13, 14, 6),
    (6, 14, 15, 7),
    (8, 16, 17, 9),
    (9, 17, 18, 10),
    (10, 18, 19, 11),
    (11, 19, 20, 12),
    (12, 20, 21, 13),
    (13, 21, 22, 14),
    (14, 22, 23, 15),
    (16, 24, 25, 17),
    (17, 25, 26, 18),
    (18, 26, 27, 19),
    (19, 27, 28, 20),
    (20, 28, 29, 21),
    (21, 29, 30, 22),
    (22, 30, 31, 23),
    (24, 32, 33, 25),
    (25, 33, 34, 26),
    (26, 34, 35, 27),
    (27, 35, 36, 28),
    (28, 36, 37, 29),
    (29, 37, 38, 30),
    (30, 38, 39, 31),
    (32, 40, 41, 33),
    (33, 41, 42, 34),
    (34, 42, 43, 35),
    (35, 43, 44, 36),
    (36, 44, 45, 37),
    (37, 45, 46, 38),
    (38, 46, 47, 39),
    (40, 48, 49, 41),
    (41, 49, 50, 42),
    (42, 50, 51, 43),
    (43, 51, 52, 44),
    (44, 52, 53, 45),
    (45, 53, 54, 46),
    (46, 54, 55, 47),
    (48, 56, 57, 49),
    (49, 57, 58, 50),
    (50, 58, 59, 51),
    (51, 59, 60, 52),
    (52, 60, 61, 53),
    (53, 61, 62, 54),
    (54, 62, 63, 55),
]
obj = make_mesh("banner", vertices, faces)
pin = obj.vertex_groups.new(name="pin")
pin.add([0, 7], 1.0, "REPLACE")
obj.location = (0, 0, 1)
obj.rotation_mode = "QUATERNION"
obj.rotation_quaternion = (0.707106781, 0.707106781, 0, 0)
mat = bpy.data.materials.new("banner:cloth")
mat.diffuse_color = (0.75, 0.2, 0.25, 1)
obj.data.materials.append(mat)
objects["banner"] = obj
# object: cushion
vertices = [
    (-0.06, -0.04, -0.03),
    (0.06, -0.04, -0.03),
    (0.06, 0.04, -0.03),
    (-0.06, 0.04, -0.03),
    (-0.06, -0.04, 0.03),
    (0.06, -0.04, 0.03),
    (0.06, 0.04, 0.03),
    (-0.06, 0.04, 0.03),
]
faces = [
    (3, 2, 1, 0),
    (4, 5, 6, 7),
    (0, 1, 5, 4),
    (1, 2, 6, 5),
    (2, 3, 7, 6),
    (3, 0, 4, 7),
]
obj = make_mesh("cushion", vertices, faces)
obj.location = (0.46, 0.04, 0.3)
obj.rotation_mode = "QUATERNION"
obj.rotation_quaternion = (1, 0, 0, 0)
mat = bpy.data.materials.new("cushion:rubber")
mat.diffuse_color = (0.8, 0.9, 0.2, 1)
obj.data.materials.append(mat)
objects["cushion"] = obj
# object: floor-block
vertices = [
    (-0.2, -0.2, -0.02),
    (0.2, -0.2, -0.02),
    (-0.2, 0.2, -0.02),
    (0.2, 0.2, -0.02),
    (-0.2, -0.2, 0.02),
    (0.2, -0.2, 0.02),
    (-0.2, 0.2, 0.02),
    (0.2, 0.2, 0.02),
]
faces = [
    (0, 4, 6, 2),
    (1, 3, 7, 5),
    (0, 1, 5, 4),
    (2, 6, 7, 3),
    (0, 2, 3, 1),
    (4, 5, 7, 6),
]
obj = make_mesh("floor-block", vertices, faces)
obj.location = (0.4, 0, 0.02)
obj.rotation_mode = "QUATERNION"
obj.rotation_quaternion = (1, 0, 0, 0)
mat = bpy.data.materials.new("floor-block:metal")
mat.diffuse_color = (0.56, 0.57, 0.58, 1)
obj.data.materials.append(mat)
objects["floor-block"] = obj

# --- SECTION 2: PHYSICAL PROPERTY SETUP ---
# object: banner
obj = objects["banner"]
props = {"mass": 0.03675, "friction": 0.6, "restitution": 0.05, "collision_margin": 5e-05, "material": "cloth", "alpha_material": 0.9, "density": 300, "elastic_modulus_E": 500000, "poisson_nu": 0.3, "thickness": 0.001}
for key in ("alpha_material", "density", "elastic_modulus_E", "poisson_nu"):
    obj[key] = props[key]
mod = obj.modifiers.new("Cloth", "CLOTH")
mod.settings.mass = props["mass"] / len(obj.data.vertices)
mod.settings.air_damping = 2.0
mod.settings.vertex_group_mass = "pin"
mod.collision_settings.friction = props["friction"]
mod.collision_settings.distance_min = props["collision_margin"]
# object: cushion
obj = objects["cushion"]
props = {"mass": 0.6336, "friction": 0.9, "restitution": 0.8, "collision_margin": 0.003, "material": "rubber", "alpha_material": 0.7, "density": 1100, "elastic_modulus_E": 10000000, "poisson_nu": 0.49, "lattice_spacing": 0.03}
for key in ("alpha_material", "density", "elastic_modulus_E", "poisson_nu"):
    obj[key] = props[key]
mod = obj.modifiers.new("Softbody", "SOFT_BODY")
mod.settings.use_goal = False
mod.settings.mass = props["mass"] / len(obj.data.vertices)
mod.settings.friction = props["friction"]
mod.settings.use_edges = True
mod.settings.pull = 0.9
mod.settings.push = 0.9
mod.settings.ball_size = props["collision_margin"]
# object: floor-block
obj = objects["floor-block"]
props = {"mass": 49.92, "friction": 0.4, "restitution": 0.3, "collision_margin": 0.002, "material": "metal", "alpha_material": 0.1, "density": 7800, "elastic_modulus_E": 2e+11, "poisson_nu": 0.3}
for key in ("alpha_material", "density", "elastic_modulus_E", "poisson_nu"):
    obj[key] = props[key]
select_only(obj)
bpy.ops.rigidbody.object_add(type="PASSIVE")
obj.rigid_body.mass = props["mass"]
obj.rigid_body.friction = props["friction"]
obj.rigid_body.restitution = props["restitution"]
obj.rigid_body.collision_shape = "BOX"
obj.rigid_body.use_margin = True
obj.rigid_body.collision_margin = props["collision_margin"]
obj.rigid_body.linear_damping = 0.0
obj.rigid_body.angular_damping = 0.0

# --- SECTION 3: MOTION SIMULATION ---
scene.use_gravity = True
scene.gravity = (0, 0, -9.81)
scene.render.fps = 30
scene.frame_start = 1
scene.frame_end = 61
scene.rigidbody_world.point_cache.frame_start = 1
scene.rigidbody_world.point_cache.frame_end = 61
scene.rigidbody_world.substeps_per_frame = 8
scene.rigidbody_world.solver_iterations = 8
# object: banner
# cloth bodies start at rest in Blender; the simulated initial velocity was (0, 0, 0)
# object: cushion
# soft bodies start at rest in Blender; the simulated initial velocity was (0, 0, 0)
# object: floor-block
# at rest
scene.frame_set(1)

# --- PROVENANCE ---
# generator: sketchplay-emitter 0.1.0
